//! Globally adaptive Gauss–Kronrod (7/15) for vector-valued integrands.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights at the odd Kronrod nodes 1, 3, 5 and the centre
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Clone, Debug)]
struct Piece<const N: usize> {
    a: f64,
    b: f64,
    value: [Complex64; N],
    error: f64,
}

impl<const N: usize> PartialEq for Piece<N> {
    fn eq(&self, o: &Self) -> bool {
        self.error == o.error
    }
}
impl<const N: usize> Eq for Piece<N> {}
impl<const N: usize> PartialOrd for Piece<N> {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl<const N: usize> Ord for Piece<N> {
    fn cmp(&self, o: &Self) -> Ordering {
        self.error.total_cmp(&o.error)
    }
}

fn rule<const N: usize, F: Fn(f64) -> [Complex64; N]>(f: &F, a: f64, b: f64) -> Piece<N> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let zero = Complex64::new(0.0, 0.0);
    let mut k = [zero; N];
    let mut g = [zero; N];
    let fc = f(c);
    for i in 0..N {
        k[i] = fc[i] * WGK[7];
        g[i] = fc[i] * WG[3];
    }
    for j in 0..7 {
        let x = h * XGK[j];
        let (f1, f2) = (f(c - x), f(c + x));
        for i in 0..N {
            let s = f1[i] + f2[i];
            k[i] += s * WGK[j];
            if j % 2 == 1 {
                g[i] += s * WG[j / 2];
            }
        }
    }
    let mut error: f64 = 0.0;
    for i in 0..N {
        k[i] *= h;
        g[i] *= h;
        error = error.max((k[i] - g[i]).norm());
    }
    Piece { a, b, value: k, error }
}

/// Integral over `[a, b]` of every component, to `max(abs, rel·|I|)` in
/// the largest component; `None` when `max_pieces` subintervals do not
/// suffice.
pub fn integrate<const N: usize, F: Fn(f64) -> [Complex64; N]>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_pieces: usize,
) -> Option<[Complex64; N]> {
    let mut heap = BinaryHeap::new();
    let first = rule(&f, a, b);
    let mut total = first.value;
    let mut err = first.error;
    heap.push(first);
    loop {
        let size = total.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if err <= abs_tol.max(rel_tol * size) {
            return Some(total);
        }
        if heap.len() >= max_pieces {
            return None;
        }
        let worst = heap.pop()?;
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            return None;
        }
        let (l, r) = (rule(&f, worst.a, m), rule(&f, m, worst.b));
        for i in 0..N {
            total[i] += l.value[i] + r.value[i] - worst.value[i];
        }
        err += l.error + r.error - worst.error;
        heap.push(l);
        heap.push(r);
        // refresh the running error now and then against drift
        if heap.len() % 256 == 0 {
            err = heap.iter().map(|p| p.error).sum();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_integral() {
        let v = integrate(
            |x| [Complex64::new((-x * x / 2.0).exp(), 0.0)],
            -12.0,
            12.0,
            1e-14,
            1e-14,
            1000,
        )
        .unwrap();
        assert!((v[0].re - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-13);
    }

    #[test]
    fn peaked_integrand() {
        // ∫ dx/(x - i ε) over [-1, 1] = 2i atan(1/ε)
        let eps = 1e-3;
        let v = integrate(|x| [Complex64::new(1.0, 0.0) / Complex64::new(x, -eps)], -1.0, 1.0, 1e-13, 1e-13, 5000)
            .unwrap();
        let exact = Complex64::new(0.0, 2.0 * (1.0 / eps).atan());
        assert!((v[0] - exact).norm() < 1e-11);
    }
}
