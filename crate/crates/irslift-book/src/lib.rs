// Chapters are included as doc comments so `cargo test` runs their snippets.
