//! Matrix exponential by scaling and squaring with diagonal Padé
//! approximants of degree 3, 5, 7, 9 or 13 (Higham 2005).

use num_complex::Complex64;

use crate::operator::CMatrix;

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// Largest 1-norm for which each approximant meets unit roundoff.
#[allow(clippy::excessive_precision)]
const THETA3: f64 = 1.495585217958292e-2;
#[allow(clippy::excessive_precision)]
const THETA5: f64 = 2.539398330063230e-1;
#[allow(clippy::excessive_precision)]
const THETA7: f64 = 9.504178996162932e-1;
#[allow(clippy::excessive_precision)]
const THETA9: f64 = 2.097847961257068;
#[allow(clippy::excessive_precision)]
const THETA13: f64 = 5.371920351148152;

fn one_norm(a: &CMatrix) -> f64 {
    a.column_iter()
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn scaled(m: &CMatrix, s: f64) -> CMatrix {
    m.map(|z| z * s)
}

/// `(V − U)⁻¹ (V + U)`
fn solve_pade(u: &CMatrix, v: &CMatrix) -> CMatrix {
    let p = v + u;
    let q = v - u;
    q.lu()
        .solve(&p)
        .expect("Padé denominator is nonsingular for norms within theta_13")
}

fn pade_low(a: &CMatrix, b: &[f64]) -> CMatrix {
    let n = a.nrows();
    let ident = CMatrix::identity(n, n);
    let a2 = a * a;
    // Even powers A^0, A^2, A^4, ...
    let mut even = vec![ident];
    while even.len() < b.len() / 2 {
        let next = even.last().unwrap() * &a2;
        even.push(next);
    }
    let mut u_inner = CMatrix::zeros(n, n);
    let mut v = CMatrix::zeros(n, n);
    for (k, pow) in even.iter().enumerate() {
        v += scaled(pow, b[2 * k]);
        u_inner += scaled(pow, b[2 * k + 1]);
    }
    let u = a * u_inner;
    solve_pade(&u, &v)
}

fn pade13(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    let b = &PADE13;
    let ident = CMatrix::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let u_high = scaled(&a6, b[13]) + scaled(&a4, b[11]) + scaled(&a2, b[9]);
    let u_inner = &a6 * u_high
        + scaled(&a6, b[7])
        + scaled(&a4, b[5])
        + scaled(&a2, b[3])
        + scaled(&ident, b[1]);
    let u = a * u_inner;

    let v_high = scaled(&a6, b[12]) + scaled(&a4, b[10]) + scaled(&a2, b[8]);
    let v = &a6 * v_high
        + scaled(&a6, b[6])
        + scaled(&a4, b[4])
        + scaled(&a2, b[2])
        + scaled(&ident, b[0]);
    solve_pade(&u, &v)
}

/// `e^A` for a square complex matrix.
pub fn expm(a: &CMatrix) -> CMatrix {
    assert!(a.is_square(), "expm needs a square matrix");
    let norm = one_norm(a);
    if !norm.is_finite() {
        return a.map(|_| Complex64::new(f64::NAN, f64::NAN));
    }
    if norm <= THETA3 {
        return pade_low(a, &PADE3);
    }
    if norm <= THETA5 {
        return pade_low(a, &PADE5);
    }
    if norm <= THETA7 {
        return pade_low(a, &PADE7);
    }
    if norm <= THETA9 {
        return pade_low(a, &PADE9);
    }
    let s = (norm / THETA13).log2().ceil().max(0.0) as i32;
    let mut r = pade13(&scaled(a, 2f64.powi(-s)));
    for _ in 0..s {
        r = &r * &r;
    }
    r
}
