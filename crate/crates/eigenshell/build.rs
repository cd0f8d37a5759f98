fn main() {
    // Dense eigensolvers call into the system LAPACK (OpenBLAS build).
    println!("cargo:rustc-link-lib=dylib=openblas");
}
