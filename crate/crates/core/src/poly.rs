//! Real polynomials stored with coefficients in descending powers of the
//! variable: `[c_n, c_{n-1}, ..., c_0]` represents `c_n z^n + ... + c_0`.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Removes exact leading zeros. The zero polynomial is returned as `[0.0]`.
pub fn trim(p: &[f64]) -> Vec<f64> {
    match p.iter().position(|&c| c != 0.0) {
        Some(i) => p[i..].to_vec(),
        None => vec![0.0],
    }
}

/// Zeroes leading coefficients whose magnitude is below `rel_tol * scale` and trims them.
pub fn trim_tol(p: &[f64], scale: f64, rel_tol: f64) -> Vec<f64> {
    let thr = rel_tol * scale.abs();
    match p.iter().position(|&c| c.abs() > thr) {
        Some(i) => p[i..].to_vec(),
        None => vec![0.0],
    }
}

pub fn degree(p: &[f64]) -> usize {
    trim(p).len() - 1
}

pub fn is_zero(p: &[f64]) -> bool {
    p.iter().all(|&c| c == 0.0)
}

pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return vec![0.0];
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    let mut out = vec![0.0; n];
    for (k, &c) in a.iter().rev().enumerate() {
        out[n - 1 - k] += c;
    }
    for (k, &c) in b.iter().rev().enumerate() {
        out[n - 1 - k] += c;
    }
    out
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|&c| c * s).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    add(a, &scale(b, -1.0))
}

/// Left-pads with zeros to length `n` (raising the nominal degree).
pub fn pad_to(p: &[f64], n: usize) -> Vec<f64> {
    if p.len() >= n {
        return p.to_vec();
    }
    let mut out = vec![0.0; n - p.len()];
    out.extend_from_slice(p);
    out
}

pub fn eval(p: &[f64], z: Complex64) -> Complex64 {
    p.iter()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

pub fn eval_real(p: &[f64], x: f64) -> f64 {
    p.iter().fold(0.0, |acc, &c| acc * x + c)
}

fn eval_with_derivative(p: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut v = Complex64::new(0.0, 0.0);
    let mut d = Complex64::new(0.0, 0.0);
    for &c in p {
        d = d * z + v;
        v = v * z + c;
    }
    (v, d)
}

pub fn derivative(p: &[f64]) -> Vec<f64> {
    let n = p.len();
    if n <= 1 {
        return vec![0.0];
    }
    p[..n - 1]
        .iter()
        .enumerate()
        .map(|(i, &c)| c * (n - 1 - i) as f64)
        .collect()
}

/// Monic real polynomial with the given roots. Roots are expected to be
/// closed under conjugation; imaginary residue of the product is dropped.
pub fn from_roots(roots: &[Complex64]) -> Vec<f64> {
    let mut acc = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); acc.len() + 1];
        for (i, &c) in acc.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c * r;
        }
        acc = next;
    }
    acc.iter().map(|c| c.re).collect()
}

/// Roots of a real polynomial.
///
/// Eigenvalues of the balanced companion matrix, followed by a few Newton
/// steps on the original polynomial. A step is kept only when it reduces the
/// residual, so clustered roots are never pushed apart.
pub fn roots(p: &[f64]) -> Vec<Complex64> {
    let p = trim(p);
    if p.len() <= 1 {
        return Vec::new();
    }
    let mut zeros_at_origin = 0;
    let mut end = p.len();
    while end > 1 && p[end - 1] == 0.0 {
        end -= 1;
        zeros_at_origin += 1;
    }
    let q = &p[..end];
    let n = q.len() - 1;
    let mut out: Vec<Complex64> = Vec::with_capacity(p.len() - 1);
    if n == 1 {
        out.push(Complex64::new(-q[1] / q[0], 0.0));
    } else if n >= 2 {
        let lead = q[0];
        let mut c = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            c[(0, j)] = -q[j + 1] / lead;
        }
        for i in 1..n {
            c[(i, i - 1)] = 1.0;
        }
        balance(&mut c);
        for ev in c.complex_eigenvalues().iter() {
            out.push(polish(q, *ev));
        }
    }
    out.extend(std::iter::repeat_n(Complex64::new(0.0, 0.0), zeros_at_origin));
    out
}

fn polish(p: &[f64], mut z: Complex64) -> Complex64 {
    let mut best = eval(p, z).norm();
    for _ in 0..8 {
        let (v, d) = eval_with_derivative(p, z);
        if d.norm() == 0.0 || !v.is_finite() {
            break;
        }
        let cand = z - v / d;
        let r = eval(p, cand).norm();
        if r.is_finite() && r < best {
            best = r;
            z = cand;
        } else {
            break;
        }
    }
    z
}

/// Parlett-Reinsch diagonal balancing (in place, powers of two).
fn balance(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    let radix = 2.0_f64;
    let mut done = false;
    let mut sweeps = 0;
    while !done && sweeps < 100 {
        done = true;
        sweeps += 1;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / radix;
            while c < g {
                f *= radix;
                c *= radix * radix;
            }
            g = r * radix;
            while c > g {
                f /= radix;
                c /= radix * radix;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                for j in 0..n {
                    a[(i, j)] /= f;
                }
                for j in 0..n {
                    a[(j, i)] *= f;
                }
            }
        }
    }
}

/// Characteristic polynomial `det(zI - A)` by the Faddeev-LeVerrier recursion.
/// Intended for the small matrices used in this crate.
pub fn charpoly(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut coeffs = vec![0.0; n + 1];
    coeffs[0] = 1.0;
    let id = DMatrix::<f64>::identity(n, n);
    let mut m = DMatrix::<f64>::zeros(n, n);
    for k in 1..=n {
        m = a * &m + &id * coeffs[k - 1];
        let am = a * &m;
        coeffs[k] = -am.trace() / k as f64;
    }
    coeffs
}
