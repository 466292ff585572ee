//! Asymptotic pairwise intersection profile.
//!
//! For an unordered pair of edges (later edge of size `i`, earlier edge of size `j`)
//! let `r_ijk` be the fraction of pairs with intersection size `k` among `C(m, 2)` pairs.
//! As `m` grows, `r_ij0 -> q_ij0` and `r_ijk ~ q_ijk / m` for `k >= 1`. The constants
//! solve `q = C q`, where `C` collects the one-step probabilities that a new edge `e`,
//! copied from `f`, meets an existing edge `g` in `k` nodes:
//!
//! - `b_ik|j`: `g` is `f` itself, of size `j`;
//! - `phi_ik|lh`: `|f| = l`, `|f & g| = h` and the overlap comes from copied nodes only;
//! - `psi_ik|ljh`: first-order correction from one extant node landing in `g`.
//!
//! The same coefficient is used whichever of `f` and `g` is older, since the copy step
//! does not depend on the age of `g`.

use serde::Serialize;

use super::perron::{perron_vector_from, CsrMatrix, DEFAULT_MAX_ITER};
use super::{binomial_pmf, choose};
use crate::error::{Error, Result};
use crate::params::ModelParams;

/// Scale applied to the extant-node landing correction `psi`.
///
/// One of `x` extant nodes lands in a fixed set of `j` outside nodes with probability
/// close to `x j / n`, and `n ~ mu_beta m`, which gives the factor `1 / mu_beta`.
/// `AsPrinted` multiplies by `mu_beta` instead, for comparison against that variant.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiScaling {
    #[default]
    InverseMuBeta,
    AsPrinted,
}

impl PsiScaling {
    fn factor(self, mu_beta: f64) -> f64 {
        match self {
            PsiScaling::InverseMuBeta => 1.0 / mu_beta,
            PsiScaling::AsPrinted => mu_beta,
        }
    }
}

/// Coefficient tables on sizes `1..=imax` and intersections `0..=imax`. Sizes index
/// directly (slot 0 unused) so lookups read like the formulas.
#[derive(Debug, Clone)]
pub struct IntersectionCoefficients {
    pub imax: usize,
    d: usize,
    b: Vec<f64>,
    phi: Vec<f64>,
    psi: Vec<f64>,
}

impl IntersectionCoefficients {
    /// `b_ik|j = P(|e| = i, |e & f| = k | |f| = j)`.
    pub fn b(&self, i: usize, k: usize, j: usize) -> f64 {
        self.b[(i * self.d + k) * self.d + j]
    }

    /// `phi_ik|lh`, the leading-order probability that `|e| = i` and `|e & g| = k` given
    /// `|f| = l` and `|f & g| = h`.
    pub fn phi(&self, i: usize, k: usize, l: usize, h: usize) -> f64 {
        self.phi[((i * self.d + k) * self.d + l) * self.d + h]
    }

    /// `psi_ik|ljh`, the coefficient of the `1/m` correction.
    pub fn psi(&self, i: usize, k: usize, l: usize, j: usize, h: usize) -> f64 {
        self.psi[(((i * self.d + k) * self.d + l) * self.d + j) * self.d + h]
    }
}

fn check_regime(params: &ModelParams, imax: usize) -> Result<()> {
    if imax < 2 {
        return Err(Error::InvalidInput(format!("imax must be at least 2, got {imax}")));
    }
    if params.beta_at(0) >= 1.0 {
        return Err(Error::Unsupported("intersection asymptotics need beta_0 < 1".into()));
    }
    Ok(())
}

pub fn intersection_coefficients(params: &ModelParams, imax: usize) -> Result<IntersectionCoefficients> {
    intersection_coefficients_with(params, imax, PsiScaling::default())
}

pub fn intersection_coefficients_with(
    params: &ModelParams,
    imax: usize,
    scaling: PsiScaling,
) -> Result<IntersectionCoefficients> {
    check_regime(params, imax)?;
    let eta = params.eta();
    let d = imax + 1;
    let kbar = params.kbar();
    let factor = scaling.factor(params.mu_beta());
    // sum_x gamma_x beta_(r - x), and the same weighted by x
    let conv = |r: usize| (0..=r.min(kbar)).map(|x| params.gamma_at(x) * params.beta_at(r - x)).sum::<f64>();
    let conv_x =
        |r: usize| (0..=r.min(kbar)).map(|x| x as f64 * params.gamma_at(x) * params.beta_at(r - x)).sum::<f64>();
    let t1 = |s: usize, l: usize| if s == 0 { 0.0 } else { binomial_pmf(l - 1, s - 1, eta) };

    let mut b = vec![0.0; d * d * d];
    for i in 1..=imax {
        for k in 1..=i {
            for j in k..=imax {
                b[(i * d + k) * d + j] = t1(k, j) * conv(i - k);
            }
        }
    }

    let mut phi = vec![0.0; d * d * d * d];
    for i in 1..=imax {
        for l in 1..=imax {
            for h in 0..=l {
                for k in 0..=h {
                    let mut total = 0.0;
                    for s in k.max(1)..=l.min(i) {
                        let w1 = choose(h, k) * choose(l - h, s - k) / choose(l, s);
                        total += t1(s, l) * w1 * conv(i - s);
                    }
                    phi[((i * d + k) * d + l) * d + h] = total;
                }
            }
        }
    }

    let mut psi = vec![0.0; d * d * d * d * d];
    for i in 1..=imax {
        for l in 1..=imax {
            for j in 1..=imax {
                for h in 0..=l.min(j) {
                    for k in 1..=(h + 1).min(l).min(j) {
                        let mut total = 0.0;
                        for s in (k - 1).max(1)..=l.min(i) {
                            let w2 = choose(h, k - 1) * choose(l - h, s + 1 - k) / choose(l, s);
                            total += t1(s, l) * w2 * conv_x(i - s);
                        }
                        psi[(((i * d + k) * d + l) * d + j) * d + h] = total * (j + 1 - k) as f64 * factor;
                    }
                }
            }
        }
    }
    Ok(IntersectionCoefficients { imax, d, b, phi, psi })
}

/// Solution of `q = C q` normalized so that `sum_ij q_ij0 = 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntersectionProfile {
    pub imax: usize,
    q: Vec<f64>,
    pub eigenvalue: f64,
    /// `||C q - lambda q||_1 / (lambda ||q||_1)` at the returned vector.
    pub residual: f64,
    pub iterations: usize,
}

impl IntersectionProfile {
    /// `q_ijk` for `1 <= i, j <= imax`, zero outside the tracked range.
    pub fn q(&self, i: usize, j: usize, k: usize) -> f64 {
        if i == 0 || j == 0 || i > self.imax || j > self.imax || k > self.imax {
            return 0.0;
        }
        self.q[flat(self.imax, i, j, k)]
    }

    /// `q_k = sum_ij q_ijk`.
    pub fn q_k(&self, k: usize) -> f64 {
        let mut total = 0.0;
        for i in 1..=self.imax {
            for j in 1..=self.imax {
                total += self.q(i, j, k);
            }
        }
        total
    }

    /// Scaling exponent of `r_k`: 0 for `k = 0`, 1 otherwise.
    pub fn lambda(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            1.0
        }
    }

    /// `(i, j, k, q_ijk)` over the entries with `k <= min(i, j)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
        let imax = self.imax;
        (1..=imax).flat_map(move |i| {
            (1..=imax).flat_map(move |j| (0..=i.min(j)).map(move |k| (i, j, k, self.q[flat(imax, i, j, k)])))
        })
    }
}

#[inline]
fn flat(imax: usize, i: usize, j: usize, k: usize) -> usize {
    ((i - 1) * imax + (j - 1)) * (imax + 1) + k
}

/// Assembles the sparse system matrix `C`. The `k = 0` block is the size transition
/// matrix and its columns are renormalized after truncation at `imax`, as for `W`.
pub fn system_matrix(coef: &IntersectionCoefficients) -> CsrMatrix {
    let imax = coef.imax;
    let dim = imax * imax * (imax + 1);
    let col_mass: Vec<f64> = (0..=imax)
        .map(|l| if l == 0 { 0.0 } else { (1..=imax).map(|i| coef.phi(i, 0, l, 0)).sum() })
        .collect();
    let mut t = Vec::new();
    for i in 1..=imax {
        for j in 1..=imax {
            let row0 = flat(imax, i, j, 0);
            for l in 1..=imax {
                if col_mass[l] > 0.0 {
                    let w = 0.5 * coef.phi(i, 0, l, 0) / col_mass[l];
                    t.push((row0, flat(imax, l, j, 0), w));
                    t.push((row0, flat(imax, j, l, 0), w));
                }
            }
            for k in 1..=i.min(j) {
                let row = flat(imax, i, j, k);
                for l in 1..=imax {
                    let mut w0 = coef.b(i, k, j);
                    if k == 1 {
                        w0 += coef.psi(i, 1, l, j, 0);
                    }
                    if w0 != 0.0 {
                        t.push((row, flat(imax, l, j, 0), w0));
                        t.push((row, flat(imax, j, l, 0), w0));
                    }
                    for h in k..=l.min(j) {
                        let w = coef.phi(i, k, l, h);
                        if w != 0.0 {
                            t.push((row, flat(imax, l, j, h), w));
                            t.push((row, flat(imax, j, l, h), w));
                        }
                    }
                }
            }
        }
    }
    CsrMatrix::from_triplets(dim, t)
}

pub fn intersection_profile(params: &ModelParams, imax: usize, tol: f64) -> Result<IntersectionProfile> {
    intersection_profile_with(params, imax, tol, DEFAULT_MAX_ITER, PsiScaling::default())
}

pub fn intersection_profile_with(
    params: &ModelParams,
    imax: usize,
    tol: f64,
    max_iter: usize,
    scaling: PsiScaling,
) -> Result<IntersectionProfile> {
    let coef = intersection_coefficients_with(params, imax, scaling)?;
    let c = system_matrix(&coef);
    let mut start = vec![0.0; imax * imax * (imax + 1)];
    for i in 1..=imax {
        for j in 1..=imax {
            for k in 0..=i.min(j) {
                start[flat(imax, i, j, k)] = 1.0;
            }
        }
    }
    let r = perron_vector_from(&c, &start, tol, max_iter)?;
    let mut q = r.vector;
    let mass0: f64 = (1..=imax).flat_map(|i| (1..=imax).map(move |j| (i, j))).map(|(i, j)| q[flat(imax, i, j, 0)]).sum();
    if !(mass0 > 0.0) {
        return Err(Error::Divergent(
            "intersection profile has no disjoint-pair mass; the k >= 1 block dominates (degree tail too heavy)".into(),
        ));
    }
    q.iter_mut().for_each(|x| *x /= mass0);
    Ok(IntersectionProfile { imax, q, eigenvalue: r.eigenvalue, residual: r.residual, iterations: r.iterations })
}

/// `r_0 = sum_ij q_ij0` and `r_k = q_k / m` for `k >= 1`.
pub fn predicted_rk(profile: &IntersectionProfile, m: u64) -> Vec<f64> {
    (0..=profile.imax)
        .map(|k| if k == 0 { profile.q_k(0) } else { profile.q_k(k) / m as f64 })
        .collect()
}
