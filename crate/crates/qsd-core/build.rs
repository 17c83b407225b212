fn main() {
    // lapack-sys only declares the FFI symbols; link the system LAPACK.
    println!("cargo:rustc-link-lib=dylib=lapack");
}
