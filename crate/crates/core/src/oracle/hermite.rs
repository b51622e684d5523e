//! The eight collision moments in products of normalized one-dimensional
//! Hermite functions `ψ_n = He_n/√n!` (index order: longitudinal, then the
//! two transverse directions).

/// `(coefficient, [a, b, c])` terms of `e_j = Σ coeff ψ_a(v1) ψ_b(v2) ψ_c(v3)`.
pub type Expansion = &'static [(f64, [usize; 3])];

const R3: f64 = 0.577_350_269_189_625_8; // 1/√3
const R06: f64 = 0.774_596_669_241_483_4; // √(6/10)
const R02: f64 = 0.447_213_595_499_958; // √(2/10)

pub const BASIS: [Expansion; 8] = [
    &[(1.0, [0, 0, 0])],
    &[(1.0, [0, 1, 0])],
    &[(1.0, [0, 0, 1])],
    &[(1.0, [1, 0, 0])],
    &[(R3, [2, 0, 0]), (R3, [0, 2, 0]), (R3, [0, 0, 2])],
    &[(R06, [0, 3, 0]), (R02, [2, 1, 0]), (R02, [0, 1, 2])],
    &[(R06, [0, 0, 3]), (R02, [2, 0, 1]), (R02, [0, 2, 1])],
    &[(R06, [3, 0, 0]), (R02, [1, 2, 0]), (R02, [1, 0, 2])],
];

/// `ψ_0(x) … ψ_n(x)`.
pub fn psi(n: usize, x: f64) -> Vec<f64> {
    let mut p = vec![0.0; n + 1];
    p[0] = 1.0;
    if n > 0 {
        p[1] = x;
    }
    for m in 1..n {
        // √(m+1) ψ_{m+1} = x ψ_m - √m ψ_{m-1}
        p[m + 1] = (x * p[m] - (m as f64).sqrt() * p[m - 1]) / ((m + 1) as f64).sqrt();
    }
    p
}

/// Transverse-averaged products `M_ij(w) = E_⊥[e_i e_j]` at longitudinal
/// velocity `w`.
pub fn transverse_average(w: f64) -> [[f64; 8]; 8] {
    let p = psi(3, w);
    let mut m = [[0.0; 8]; 8];
    for i in 0..8 {
        for j in i..8 {
            let mut s = 0.0;
            for &(ci, [ai, bi, gi]) in BASIS[i] {
                for &(cj, [aj, bj, gj]) in BASIS[j] {
                    if bi == bj && gi == gj {
                        s += ci * cj * p[ai] * p[aj];
                    }
                }
            }
            m[i][j] = s;
            m[j][i] = s;
        }
    }
    m
}
