//! Dense kernel matrices over (evaluation nodes × mesh nodes) and their algebra.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::KernelError;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    K,
    C,
    B,
    BSegment,
    OmegaTilde,
    Pi,
    Omega,
    Composed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Oracle,
    Spectral,
    MonteCarlo,
    Composed,
}

/// Height or segment a kernel belongs to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelLabel {
    None,
    Height(f64),
    Segment(f64, f64),
    /// Composition over a partition of the segment with `pieces` pieces.
    Partition {
        segment: (f64, f64),
        pieces: usize,
    },
}

/// Kernel values `K[i][j]` (Martin normalization: rows integrate against the cell weights)
/// for evaluation nodes `rows[i]` and all mesh nodes `j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DiscreteKernel<F: Scalar> {
    pub kind: KernelKind,
    pub label: KernelLabel,
    pub epsilon: Option<f64>,
    pub provenance: Provenance,
    pub rows: Vec<usize>,
    pub cols: usize,
    /// Row-major `rows.len() × cols`.
    pub values: Vec<F>,
    /// Cell weights `w_j` of the columns.
    pub weights: Vec<F>,
    /// Columns whose weight is below the floor; their entries are zero and excluded.
    pub flagged: Vec<usize>,
}

/// Weights below this are treated as empty cells.
pub const WEIGHT_FLOOR: f64 = 1e-300;

impl<F: Scalar> DiscreteKernel<F> {
    /// Kernel from measure-form entries `M[i][j] = K[i][j] w_j`.
    pub fn from_measure_form(
        kind: KernelKind,
        label: KernelLabel,
        provenance: Provenance,
        rows: Vec<usize>,
        measure: Vec<F>,
        weights: Vec<F>,
    ) -> Result<Self, KernelError> {
        let cols = weights.len();
        if measure.len() != rows.len() * cols {
            return Err(KernelError::ShapeMismatch { expected: rows.len() * cols, got: measure.len() });
        }
        let floor = F::lit(WEIGHT_FLOOR);
        let flagged: Vec<usize> = (0..cols).filter(|&j| weights[j] <= floor).collect();
        let values = measure
            .par_chunks(cols.max(1))
            .flat_map_iter(|row| {
                row.iter().zip(&weights).map(move |(&m, &w)| if w <= floor { F::zero() } else { m / w })
            })
            .collect();
        let kernel = DiscreteKernel { kind, label, epsilon: None, provenance, rows, cols, values, weights, flagged };
        kernel.check_finite()?;
        Ok(kernel)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = Some(epsilon);
        self
    }

    fn check_finite(&self) -> Result<(), KernelError> {
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(KernelError::NonFinite);
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, r: usize) -> &[F] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn entry(&self, r: usize, c: usize) -> F {
        self.values[r * self.cols + c]
    }

    /// `Σ_j K[i][j] w_j` per row.
    pub fn row_integrals(&self) -> Vec<F> {
        (0..self.n_rows()).map(|r| self.row(r).iter().zip(&self.weights).map(|(&k, &w)| k * w).sum()).collect()
    }

    /// `sup_i Σ_j |K[i][j]| w_j`.
    pub fn l1_row_norm(&self) -> F {
        (0..self.n_rows())
            .map(|r| self.row(r).iter().zip(&self.weights).map(|(&k, &w)| k.abs() * w).sum())
            .fold(F::zero(), F::max)
    }

    pub fn max_abs(&self) -> F {
        self.values.iter().fold(F::zero(), |a, &v| a.max(v.abs()))
    }

    pub fn min_entry(&self) -> F {
        self.values.iter().copied().fold(F::infinity(), F::min)
    }

    /// `max |K − L|` over entries of equal-shape kernels.
    pub fn max_abs_diff(&self, other: &DiscreteKernel<F>) -> Result<F, KernelError> {
        self.same_shape(other)?;
        Ok(self.values.iter().zip(&other.values).fold(F::zero(), |a, (&x, &y)| a.max((x - y).abs())))
    }

    fn same_shape(&self, other: &DiscreteKernel<F>) -> Result<(), KernelError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(KernelError::ShapeMismatch { expected: self.values.len(), got: other.values.len() });
        }
        Ok(())
    }

    /// Entrywise linear combination `a·self + b·other`.
    pub fn combine(&self, a: F, other: &DiscreteKernel<F>, b: F, kind: KernelKind) -> Result<Self, KernelError> {
        self.same_shape(other)?;
        Ok(DiscreteKernel {
            kind,
            values: self.values.iter().zip(&other.values).map(|(&x, &y)| a * x + b * y).collect(),
            provenance: Provenance::Composed,
            ..self.clone()
        })
    }
}

/// `(Qf)(x_i) = Σ_j K[i][j] f_j w_j`.
pub fn apply_kernel<F: Scalar>(kernel: &DiscreteKernel<F>, data: &[F]) -> Result<Vec<F>, KernelError> {
    if data.len() != kernel.cols {
        return Err(KernelError::ShapeMismatch { expected: kernel.cols, got: data.len() });
    }
    let weighted: Vec<F> = data.iter().zip(&kernel.weights).map(|(&f, &w)| f * w).collect();
    Ok((0..kernel.n_rows())
        .into_par_iter()
        .map(|r| kernel.row(r).iter().zip(&weighted).map(|(&k, &g)| k * g).sum())
        .collect())
}

/// `(p∘q)[i][j] = Σ_ζ p[i][ζ] q[ζ][j] w_ζ`; `q` must have every mesh node as a row.
pub fn compose<F: Scalar>(p: &DiscreteKernel<F>, q: &DiscreteKernel<F>) -> Result<DiscreteKernel<F>, KernelError> {
    let n = q.cols;
    let full_rows = q.rows.len() == p.cols && q.rows.iter().enumerate().all(|(i, &r)| i == r);
    if !full_rows || p.weights != q.weights {
        return Err(KernelError::ShapeMismatch { expected: p.cols, got: q.rows.len() });
    }
    let values: Vec<F> = (0..p.n_rows())
        .into_par_iter()
        .flat_map_iter(|r| {
            let mut acc = vec![F::zero(); n];
            for (zeta, (&pv, &w)) in p.row(r).iter().zip(&p.weights).enumerate() {
                let scale = pv * w;
                if scale != F::zero() {
                    for (a, &qv) in acc.iter_mut().zip(q.row(zeta)) {
                        *a = *a + scale * qv;
                    }
                }
            }
            acc
        })
        .collect();
    Ok(DiscreteKernel {
        kind: KernelKind::Composed,
        label: KernelLabel::None,
        epsilon: None,
        provenance: Provenance::Composed,
        rows: p.rows.clone(),
        cols: n,
        values,
        weights: q.weights.clone(),
        flagged: q.flagged.clone(),
    })
}

/// Sidecar metadata of the binary kernel layout.
#[derive(Serialize, Deserialize)]
struct Sidecar {
    kind: KernelKind,
    label: KernelLabel,
    epsilon: Option<f64>,
    provenance: Provenance,
    rows: Vec<usize>,
    cols: usize,
    weights: Vec<f64>,
    flagged: Vec<usize>,
    layout: String,
}

/// Writes `stem.bin` (row-major little-endian `f64`) and `stem.json`.
pub fn write_kernel<F: Scalar>(kernel: &DiscreteKernel<F>, stem: &Path) -> Result<(), KernelError> {
    let mut bin = BufWriter::new(File::create(stem.with_extension("bin"))?);
    for v in &kernel.values {
        bin.write_all(&v.as_f64().to_le_bytes())?;
    }
    bin.flush()?;
    let sidecar = Sidecar {
        kind: kernel.kind,
        label: kernel.label.clone(),
        epsilon: kernel.epsilon,
        provenance: kernel.provenance,
        rows: kernel.rows.clone(),
        cols: kernel.cols,
        weights: kernel.weights.iter().map(|w| w.as_f64()).collect(),
        flagged: kernel.flagged.clone(),
        layout: "row-major little-endian f64, rows x cols".into(),
    };
    let json = serde_json::to_string_pretty(&sidecar).map_err(|e| KernelError::Io(e.to_string()))?;
    std::fs::write(stem.with_extension("json"), json)?;
    Ok(())
}

/// Reads a kernel written by [`write_kernel`].
pub fn read_kernel<F: Scalar>(stem: &Path) -> Result<DiscreteKernel<F>, KernelError> {
    let text = std::fs::read_to_string(stem.with_extension("json"))?;
    let sidecar: Sidecar = serde_json::from_str(&text).map_err(|e| KernelError::Io(e.to_string()))?;
    let mut bytes = Vec::new();
    BufReader::new(File::open(stem.with_extension("bin"))?).read_to_end(&mut bytes)?;
    let expected = sidecar.rows.len() * sidecar.cols;
    if bytes.len() != 8 * expected {
        return Err(KernelError::ShapeMismatch { expected, got: bytes.len() / 8 });
    }
    let values = bytes.chunks_exact(8).map(|c| F::lit(f64::from_le_bytes(c.try_into().expect("chunk of 8")))).collect();
    Ok(DiscreteKernel {
        kind: sidecar.kind,
        label: sidecar.label,
        epsilon: sidecar.epsilon,
        provenance: sidecar.provenance,
        rows: sidecar.rows,
        cols: sidecar.cols,
        values,
        weights: sidecar.weights.into_iter().map(F::lit).collect(),
        flagged: sidecar.flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kernel(values: Vec<f64>, weights: Vec<f64>) -> DiscreteKernel<f64> {
        let n = weights.len();
        DiscreteKernel {
            kind: KernelKind::K,
            label: KernelLabel::None,
            epsilon: None,
            provenance: Provenance::Oracle,
            rows: (0..values.len() / n).collect(),
            cols: n,
            values,
            weights,
            flagged: vec![],
        }
    }

    #[test]
    fn delta_kernel_is_identity_for_composition() {
        let w = vec![0.2, 0.3, 0.5];
        let k = kernel(vec![1.0, 2.0, 0.5, 0.1, 0.7, 1.9, 3.0, 0.2, 0.4], w.clone());
        let mut delta = vec![0.0; 9];
        for i in 0..3 {
            delta[i * 3 + i] = 1.0 / w[i];
        }
        let id = kernel(delta, w);
        let left = compose(&id, &k).unwrap();
        let right = compose(&k, &id).unwrap();
        assert!(left.max_abs_diff(&k).unwrap() < 1e-15);
        assert!(right.max_abs_diff(&k).unwrap() < 1e-15);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let a = kernel(vec![1.0; 4], vec![0.5, 0.5]);
        let b = kernel(vec![1.0; 3], vec![0.2, 0.3, 0.5]);
        assert!(matches!(compose(&a, &b), Err(KernelError::ShapeMismatch { .. })));
        assert!(apply_kernel(&a, &[1.0]).is_err());
    }

    #[test]
    fn binary_round_trip() {
        let k = kernel(vec![1.0, -2.5, 0.125, 3.0], vec![0.25, 0.75]).with_epsilon(0.05);
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("k");
        write_kernel(&k, &stem).unwrap();
        let back: DiscreteKernel<f64> = read_kernel(&stem).unwrap();
        assert_eq!(back, k);
    }
}
