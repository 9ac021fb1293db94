//! Covariant derivatives, norms, Laplacian and curvature with second-order
//! centred differences.
//!
//! For `g = e^{2f}δ` the Christoffel symbols are
//! `Γ^p_{ai} = δ^p_a ∂_i f + δ^p_i ∂_a f − δ_{ai} ∂_p f`, and in two
//! dimensions the curvature tensor is `K (g ∧ g)` with `K = R/2`, so every
//! derivative of `Rm` is a derivative of `R` times a parallel tensor of
//! norm 2.

use super::{
    ConformalMetric, GeometryError, GridSpec, Result, ScalarField, TensorField, DEFAULT_MAX_RANK,
};

/// Metric-derived data reused across several derivative evaluations.
#[derive(Debug, Clone)]
pub struct CovariantCalculus<'m> {
    metric: &'m ConformalMetric,
    df: [Vec<f64>; 2],
    inv_factor: Vec<f64>,
    max_rank: usize,
}

impl<'m> CovariantCalculus<'m> {
    pub fn new(metric: &'m ConformalMetric) -> Self {
        Self::with_max_rank(metric, DEFAULT_MAX_RANK)
    }

    pub fn with_max_rank(metric: &'m ConformalMetric, max_rank: usize) -> Self {
        let spec = *metric.spec();
        let f = metric.exponent().values();
        let (hx, hy) = (spec.hx(), spec.hy());
        let mut dfx = vec![0.0; spec.len()];
        let mut dfy = vec![0.0; spec.len()];
        for c in 0..spec.len() {
            dfx[c] = (f[spec.offset(c, 1, 0)] - f[spec.offset(c, -1, 0)]) / (2.0 * hx);
            dfy[c] = (f[spec.offset(c, 0, 1)] - f[spec.offset(c, 0, -1)]) / (2.0 * hy);
        }
        let inv_factor = f.iter().map(|v| (-2.0 * v).exp()).collect();
        Self {
            metric,
            df: [dfx, dfy],
            inv_factor,
            max_rank,
        }
    }

    pub fn metric(&self) -> &ConformalMetric {
        self.metric
    }

    pub fn max_rank(&self) -> usize {
        self.max_rank
    }

    fn spec(&self) -> &GridSpec {
        self.metric.spec()
    }

    /// `∇T`, with the new index placed first.
    pub fn derivative(&self, field: &TensorField) -> Result<TensorField> {
        self.metric.check_aligned(field.spec())?;
        let rank = field.rank() + 1;
        if rank > self.max_rank {
            return Err(GeometryError::UnsupportedRank {
                rank,
                max: self.max_rank,
            });
        }
        let spec = *self.spec();
        let h = [spec.hx(), spec.hy()];
        let n_in = field.num_components();
        let n_out = n_in << 1;
        let src = field.components();
        let mut out = vec![0.0; spec.len() * n_out];
        for cell in 0..spec.len() {
            let fgrad = [self.df[0][cell], self.df[1][cell]];
            let here = field.cell(cell);
            for a in 0..2 {
                let (dx, dy) = if a == 0 { (1, 0) } else { (0, 1) };
                let plus = spec.offset(cell, dx, dy) * n_in;
                let minus = spec.offset(cell, -dx, -dy) * n_in;
                for c in 0..n_in {
                    let mut v = (src[plus + c] - src[minus + c]) / (2.0 * h[a]);
                    // Σ_m Σ_p Γ^p_{a i_m} T_{..p..}
                    for m in 0..field.rank() {
                        let shift = field.rank() - 1 - m;
                        let i = (c >> shift) & 1;
                        let with = |p: usize| (c & !(1 << shift)) | (p << shift);
                        let mut corr = fgrad[i] * here[with(a)] + fgrad[a] * here[c];
                        if a == i {
                            corr -= fgrad[0] * here[with(0)] + fgrad[1] * here[with(1)];
                        }
                        v -= corr;
                    }
                    out[cell * n_out + (a << field.rank()) + c] = v;
                }
            }
        }
        Ok(TensorField {
            spec,
            rank,
            components: out,
        })
    }

    /// `∇u` of a scalar field.
    pub fn gradient(&self, u: &ScalarField) -> Result<TensorField> {
        self.derivative(&TensorField::from_scalar(u))
    }

    /// `[∇u, ∇²u, …, ∇^k u]`.
    pub fn derivatives(&self, u: &ScalarField, k: usize) -> Result<Vec<TensorField>> {
        if k > self.max_rank {
            return Err(GeometryError::UnsupportedRank {
                rank: k,
                max: self.max_rank,
            });
        }
        let mut out: Vec<TensorField> = Vec::with_capacity(k);
        let mut current = TensorField::from_scalar(u);
        for _ in 0..k {
            current = self.derivative(&current)?;
            out.push(current.clone());
        }
        Ok(out)
    }

    /// Pointwise `|T|_g`, contracting every index with `g^{-1} = e^{-2f}δ`.
    pub fn norm(&self, field: &TensorField) -> Result<ScalarField> {
        self.metric.check_aligned(field.spec())?;
        let spec = *self.spec();
        let values = (0..spec.len())
            .map(|cell| {
                let sq: f64 = field.cell(cell).iter().map(|c| c * c).sum();
                (sq * self.inv_factor[cell].powi(field.rank() as i32)).sqrt()
            })
            .collect();
        Ok(ScalarField::from_raw(spec, values))
    }

    /// Flat five-point Laplacian `Δ₀u`.
    pub fn flat_laplacian(&self, u: &ScalarField) -> Result<ScalarField> {
        self.metric.check_aligned(u.spec())?;
        Ok(flat_laplacian(u))
    }

    /// `Δ_g u = e^{-2f} Δ₀u`.
    pub fn laplacian(&self, u: &ScalarField) -> Result<ScalarField> {
        let mut lap = self.flat_laplacian(u)?;
        for (v, w) in lap.values_mut().iter_mut().zip(&self.inv_factor) {
            *v *= w;
        }
        Ok(lap)
    }

    /// `R = −2 e^{-2f} Δ₀f`.
    pub fn scalar_curvature(&self) -> ScalarField {
        let mut r = flat_laplacian(self.metric.exponent());
        for (v, w) in r.values_mut().iter_mut().zip(&self.inv_factor) {
            *v *= -2.0 * w;
        }
        r
    }

    /// `|∇^i Rm|`; in two dimensions this equals `|∇^i R|`.
    pub fn curvature_derivative_norm(&self, order: usize) -> Result<ScalarField> {
        let max = self.max_rank.saturating_sub(2);
        if order > max {
            return Err(GeometryError::UnsupportedOrder { order, max });
        }
        let r = self.scalar_curvature();
        if order == 0 {
            return Ok(r.map(f64::abs));
        }
        let derivs = self.derivatives(&r, order)?;
        self.norm(&derivs[order - 1])
    }

    /// `g^{ab} T_{ab}` of a rank-2 field.
    pub fn trace(&self, field: &TensorField) -> Result<ScalarField> {
        if field.rank() != 2 {
            return Err(GeometryError::UnsupportedRank {
                rank: field.rank(),
                max: 2,
            });
        }
        let spec = *self.spec();
        let values = (0..spec.len())
            .map(|cell| {
                let t = field.cell(cell);
                self.inv_factor[cell] * (t[0] + t[3])
            })
            .collect();
        Ok(ScalarField::from_raw(spec, values))
    }
}

pub(crate) fn flat_laplacian(u: &ScalarField) -> ScalarField {
    let spec = *u.spec();
    let (ihx2, ihy2) = (1.0 / spec.hx().powi(2), 1.0 / spec.hy().powi(2));
    let v = u.values();
    let values = (0..spec.len())
        .map(|c| {
            (v[spec.offset(c, 1, 0)] - 2.0 * v[c] + v[spec.offset(c, -1, 0)]) * ihx2
                + (v[spec.offset(c, 0, 1)] - 2.0 * v[c] + v[spec.offset(c, 0, -1)]) * ihy2
        })
        .collect();
    ScalarField::from_raw(spec, values)
}

pub fn scalar_curvature(metric: &ConformalMetric) -> ScalarField {
    CovariantCalculus::new(metric).scalar_curvature()
}

pub fn covariant_derivative(metric: &ConformalMetric, field: &TensorField) -> Result<TensorField> {
    CovariantCalculus::new(metric).derivative(field)
}

pub fn gradient(metric: &ConformalMetric, u: &ScalarField) -> Result<TensorField> {
    CovariantCalculus::new(metric).gradient(u)
}

pub fn tensor_norm(metric: &ConformalMetric, field: &TensorField) -> Result<ScalarField> {
    CovariantCalculus::new(metric).norm(field)
}

pub fn laplace_beltrami(metric: &ConformalMetric, u: &ScalarField) -> Result<ScalarField> {
    CovariantCalculus::new(metric).laplacian(u)
}

pub fn curvature_derivative_norm(metric: &ConformalMetric, order: usize) -> Result<ScalarField> {
    CovariantCalculus::new(metric).curvature_derivative_norm(order)
}
