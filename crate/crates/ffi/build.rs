fn main() {
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").unwrap();
    let config = cbindgen::Config {
        language: cbindgen::Language::C,
        include_guard: Some("PRAGRANK_H".to_string()),
        header: Some(
            "/* C ABI for the pragrank reranking engine. Generated by cbindgen; do not edit. */"
                .to_string(),
        ),
        cpp_compat: true,
        documentation: true,
        ..Default::default()
    };
    match cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_config(config)
        .generate()
    {
        Ok(bindings) => {
            bindings.write_to_file(format!("{crate_dir}/include/pragrank.h"));
        }
        // Header generation failures must not break `cargo build` for
        // downstream users; the committed header stays in place.
        Err(err) => println!("cargo:warning=cbindgen failed: {err}"),
    }
    println!("cargo:rerun-if-changed=src/lib.rs");
}
