use nalgebra::DMatrix;

use super::{BasisBlock, ObfBasis};
use crate::error::Result;
use crate::linalg::StateSpace;

/// State-space realization of the stacked filter bank `[phi_0, ..., phi_n]`
/// (one input, `n + 1` outputs). Sections are cascaded through the all-pass
/// chain so the state dimension equals the number of generating poles.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisBankRealization {
    pub ss: StateSpace,
}

impl BasisBankRealization {
    pub fn states(&self) -> usize {
        self.ss.states()
    }

    pub fn functions(&self) -> usize {
        self.ss.outputs()
    }
}

pub fn realize_bank(basis: &ObfBasis) -> Result<BasisBankRealization> {
    let nx: usize = basis.blocks().iter().map(|b| b.functions()).sum();
    let ny = basis.len();
    let mut a = DMatrix::<f64>::zeros(nx, nx);
    let mut b = DMatrix::<f64>::zeros(nx, 1);
    let mut c = DMatrix::<f64>::zeros(ny, nx);
    let mut d = DMatrix::<f64>::zeros(ny, 1);
    d[(0, 0)] = 1.0;

    // Chain signal entering the current section, as (state coefficients, input coefficient).
    let mut g_x = vec![0.0; nx];
    let mut g_u = 1.0;
    let mut x0 = 0;
    let mut out = 1;
    for blk in basis.blocks() {
        match *blk {
            BasisBlock::Real { pole } => {
                // x+ = pole x + g;  phi = sqrt(1 - pole^2) x;  g' = -pole g + (1 - pole^2) x
                for j in 0..nx {
                    a[(x0, j)] = g_x[j];
                }
                a[(x0, x0)] += pole;
                b[(x0, 0)] = g_u;
                if out < ny {
                    c[(out, x0)] = (1.0 - pole * pole).sqrt();
                    out += 1;
                }
                for v in g_x.iter_mut() {
                    *v *= -pole;
                }
                g_x[x0] += 1.0 - pole * pole;
                g_u *= -pole;
            }
            BasisBlock::Pair { re, im } => {
                let (bb, cc) = BasisBlock::kautz(re, im);
                let (s1, s2) = (x0, x0 + 1);
                // Controllable canonical form of 1 / (z^2 + b(c-1) z - c).
                a[(s1, s2)] = 1.0;
                for j in 0..nx {
                    a[(s2, j)] = g_x[j];
                }
                a[(s2, s1)] += cc;
                a[(s2, s2)] += -bb * (cc - 1.0);
                b[(s2, 0)] = g_u;
                let gain = (1.0 - cc * cc).sqrt();
                if out < ny {
                    c[(out, s2)] = gain;
                    c[(out, s1)] = -gain * bb;
                    out += 1;
                }
                if out < ny {
                    c[(out, s1)] = gain * (1.0 - bb * bb).sqrt();
                    out += 1;
                }
                // g' = -c g + b(c-1)(1+c) s2 + (1-c^2) s1
                for v in g_x.iter_mut() {
                    *v *= -cc;
                }
                g_x[s2] += bb * (cc - 1.0) * (1.0 + cc);
                g_x[s1] += 1.0 - cc * cc;
                g_u *= -cc;
            }
        }
        x0 += blk.functions();
    }
    Ok(BasisBankRealization { ss: StateSpace::new(a, b, c, d)? })
}
