fn main() {
    // LAPACK routines (dgeev/zgelsd/zgetrf/...) are provided by the system
    // OpenBLAS, which bundles the full LAPACK implementation.
    println!("cargo:rustc-link-lib=dylib=openblas");
}
