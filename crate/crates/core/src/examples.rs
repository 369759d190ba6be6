//! Named automorphisms used throughout the test battery and the CLI.

use crate::lattice::LatticeAutomorphism;
use crate::poly::IntPoly;

/// `x^4 - x^3 - x^2 - x + 1`: irreducible, ergodic, one stable, two unit-modulus and
/// one unstable root.
pub fn quartic_poly() -> IntPoly {
    IntPoly::from_desc(&[1, -1, -1, -1, 1])
}

/// Companion matrix of [`quartic_poly`].
pub fn quartic_companion() -> LatticeAutomorphism {
    LatticeAutomorphism::from_rows(&[
        vec![0, 0, 0, -1],
        vec![1, 0, 0, 1],
        vec![0, 1, 0, 1],
        vec![0, 0, 1, 1],
    ])
    .expect("unimodular")
}

/// `[[0, I], [-I, S]]` with `S = [[2, 1], [1, -1]]`. It preserves the standard form
/// `[[0, I], [-I, 0]]` and its eigenvalues satisfy `x + 1/x in spec(S)`, so the
/// characteristic polynomial is again [`quartic_poly`].
pub fn quartic_symplectic() -> LatticeAutomorphism {
    LatticeAutomorphism::from_rows(&[
        vec![0, 0, 1, 0],
        vec![0, 0, 0, 1],
        vec![-1, 0, 2, 1],
        vec![0, -1, 1, -1],
    ])
    .expect("unimodular")
}

/// `[[2, 1], [1, 1]]`.
pub fn cat_map() -> LatticeAutomorphism {
    LatticeAutomorphism::from_rows(&[vec![2, 1], vec![1, 1]]).expect("unimodular")
}

/// Looks up a named example.
pub fn by_name(name: &str) -> Option<LatticeAutomorphism> {
    match name {
        "quartic" | "quartic_companion" => Some(quartic_companion()),
        "quartic_symplectic" => Some(quartic_symplectic()),
        "cat" | "cat_map" => Some(cat_map()),
        _ => None,
    }
}
