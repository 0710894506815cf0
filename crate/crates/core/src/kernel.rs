//! Samples, Gaussian kernels, and Gram-matrix plumbing.
//!
//! Every statistic in this crate is a function of one Gram matrix per
//! variable. A [`Dataset`] holds jointly observed samples of named
//! (possibly vector-valued) variables; [`GramSet`] turns it into
//! uncentred and centred Gaussian Gram matrices with
//! median-heuristic bandwidths. Centring is the empirical analogue of
//! subtracting the mean embedding and is what collapses the signed
//! expansions to their reduced forms.

use ndarray::Array2;

use crate::error::Error;
use crate::{Result, MAX_VARIABLES};

/// Jointly observed samples of one variable: `n` rows, one per sample,
/// with `m >= 1` columns for vector-valued observations.
#[derive(Clone, Debug)]
pub struct VariableSamples {
    name: String,
    values: Array2<f64>,
}

impl VariableSamples {
    pub fn new(name: impl Into<String>, values: Array2<f64>) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::Data("variable name is empty".into()));
        }
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::Data(format!(
                "variable {name} has no samples or no components"
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "variable {name} contains a non-finite value {bad}"
            )));
        }
        Ok(Self { name, values })
    }

    /// Wraps a scalar variable given as one value per sample.
    pub fn scalar(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        let values = Array2::from_shape_vec((n, 1), values)
            .expect("shape follows from the input length");
        Self::new(name, values)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Sample count.
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    /// Components per observation.
    pub fn width(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }
}

/// A collection of variables observed on the same `n` samples.
#[derive(Clone, Debug)]
pub struct Dataset {
    variables: Vec<VariableSamples>,
}

impl Dataset {
    pub fn new(variables: Vec<VariableSamples>) -> Result<Self> {
        let d = variables.len();
        if !(2..=MAX_VARIABLES).contains(&d) {
            return Err(Error::DimensionOutOfRange {
                what: "dataset variables",
                d,
                min: 2,
                max: MAX_VARIABLES,
            });
        }
        let n = variables[0].n();
        if n < 2 {
            return Err(Error::Data(format!(
                "need at least 2 joint samples, got {n}"
            )));
        }
        for v in &variables {
            if v.n() != n {
                return Err(Error::Data(format!(
                    "variable {} has {} samples, expected {n}",
                    v.name(),
                    v.n()
                )));
            }
        }
        for (i, v) in variables.iter().enumerate() {
            if variables[..i].iter().any(|w| w.name() == v.name()) {
                return Err(Error::Data(format!("duplicate variable name {}", v.name())));
            }
        }
        Ok(Self { variables })
    }

    /// Number of variables.
    pub fn d(&self) -> usize {
        self.variables.len()
    }

    /// Number of joint samples.
    pub fn n(&self) -> usize {
        self.variables[0].n()
    }

    pub fn variables(&self) -> &[VariableSamples] {
        &self.variables
    }

    pub fn variable(&self, i: usize) -> &VariableSamples {
        &self.variables[i]
    }
}

/// Median of the Euclidean distances over all distinct sample pairs.
///
/// For an even number of pairs the two middle values are averaged. A
/// zero median (many repeated points) falls back to the smallest
/// positive distance, and a degenerate constant sample to 1, so the
/// result is always a usable bandwidth.
pub fn median_heuristic(values: &Array2<f64>) -> f64 {
    let n = values.nrows();
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let mut sq = 0.0;
            for c in 0..values.ncols() {
                let diff = values[[i, c]] - values[[j, c]];
                sq += diff * diff;
            }
            dists.push(sq.sqrt());
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let mid = dists.len() / 2;
    let median = if dists.len() % 2 == 1 {
        dists[mid]
    } else {
        0.5 * (dists[mid - 1] + dists[mid])
    };
    if median > 0.0 {
        return median;
    }
    dists.iter().copied().find(|&v| v > 0.0).unwrap_or(1.0)
}

/// Gaussian Gram matrix `exp(-|x_i - x_j|^2 / (2 sigma^2))`.
pub fn gram_gaussian(values: &Array2<f64>, sigma: f64) -> Result<Array2<f64>> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bandwidth must be positive and finite, got {sigma}"
        )));
    }
    let n = values.nrows();
    let inv = 1.0 / (2.0 * sigma * sigma);
    let mut k = Array2::zeros((n, n));
    for i in 0..n {
        k[[i, i]] = 1.0;
        for j in i + 1..n {
            let mut sq = 0.0;
            for c in 0..values.ncols() {
                let diff = values[[i, c]] - values[[j, c]];
                sq += diff * diff;
            }
            let v = (-sq * inv).exp();
            k[[i, j]] = v;
            k[[j, i]] = v;
        }
    }
    Ok(k)
}

/// Doubly centres a Gram matrix: subtracts row and column means and
/// adds back the grand mean. Centred rows and columns sum to zero.
pub fn centre_gram(k: &Array2<f64>) -> Array2<f64> {
    let n = k.nrows();
    let row_means: Vec<f64> = k.rows().into_iter().map(|r| r.mean().unwrap()).collect();
    let col_means: Vec<f64> = k.columns().into_iter().map(|c| c.mean().unwrap()).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let mut out = k.clone();
    for i in 0..n {
        for j in 0..k.ncols() {
            out[[i, j]] = k[[i, j]] - row_means[i] - col_means[j] + grand;
        }
    }
    out
}

/// Reindexes both axes of a Gram matrix by a sample permutation:
/// `out[i][j] = k[perm[i]][perm[j]]`.
pub fn permute_gram(k: &Array2<f64>, perm: &[usize]) -> Array2<f64> {
    debug_assert_eq!(k.nrows(), perm.len());
    let n = perm.len();
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        let pi = perm[i];
        for j in 0..n {
            out[[i, j]] = k[[pi, perm[j]]];
        }
    }
    out
}

/// One Gram matrix per variable, uncentred and centred, with the
/// bandwidths that produced them.
#[derive(Clone, Debug)]
pub struct GramSet {
    grams: Vec<Array2<f64>>,
    centred: Vec<Array2<f64>>,
    bandwidths: Vec<f64>,
    n: usize,
}

impl GramSet {
    /// Gaussian grams with per-variable median-heuristic bandwidths.
    pub fn gaussian(data: &Dataset) -> Result<Self> {
        let bw: Vec<f64> = data
            .variables()
            .iter()
            .map(|v| median_heuristic(v.values()))
            .collect();
        Self::gaussian_with_bandwidths(data, &bw)
    }

    /// Gaussian grams with explicit bandwidths, one per variable.
    pub fn gaussian_with_bandwidths(data: &Dataset, bandwidths: &[f64]) -> Result<Self> {
        if bandwidths.len() != data.d() {
            return Err(Error::InvalidParameter(format!(
                "{} bandwidths for {} variables",
                bandwidths.len(),
                data.d()
            )));
        }
        let grams: Vec<Array2<f64>> = data
            .variables()
            .iter()
            .zip(bandwidths)
            .map(|(v, &s)| gram_gaussian(v.values(), s))
            .collect::<Result<_>>()?;
        let centred = grams.iter().map(centre_gram).collect();
        Ok(Self {
            grams,
            centred,
            bandwidths: bandwidths.to_vec(),
            n: data.n(),
        })
    }

    /// Builds a set from precomputed uncentred grams (used by
    /// permutation tests that reindex matrices directly).
    pub fn from_grams(grams: Vec<Array2<f64>>) -> Result<Self> {
        let d = grams.len();
        if !(2..=MAX_VARIABLES).contains(&d) {
            return Err(Error::DimensionOutOfRange {
                what: "gram matrices",
                d,
                min: 2,
                max: MAX_VARIABLES,
            });
        }
        let n = grams[0].nrows();
        for g in &grams {
            if g.nrows() != n || g.ncols() != n {
                return Err(Error::Data(format!(
                    "gram matrix is {}x{}, expected {n}x{n}",
                    g.nrows(),
                    g.ncols()
                )));
            }
        }
        let centred = grams.iter().map(centre_gram).collect();
        let bandwidths = vec![f64::NAN; d];
        Ok(Self {
            grams,
            centred,
            bandwidths,
            n,
        })
    }

    pub fn d(&self) -> usize {
        self.grams.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gram(&self, i: usize) -> &Array2<f64> {
        &self.grams[i]
    }

    pub fn centred(&self, i: usize) -> &Array2<f64> {
        &self.centred[i]
    }

    pub fn grams(&self) -> &[Array2<f64>] {
        &self.grams
    }

    pub fn centred_grams(&self) -> &[Array2<f64>] {
        &self.centred
    }

    pub fn bandwidth(&self, i: usize) -> f64 {
        self.bandwidths[i]
    }
}

/// Hadamard product of the uncentred grams of a group of variables: the
/// Gram matrix of the product kernel that treats the group as one
/// variable.
pub fn block_kernel(grams: &GramSet, block: &[usize]) -> Result<Array2<f64>> {
    if block.is_empty() {
        return Err(Error::InvalidParameter("empty variable block".into()));
    }
    for &v in block {
        if v >= grams.d() {
            return Err(Error::InvalidParameter(format!(
                "variable index {v} out of range for {} grams",
                grams.d()
            )));
        }
    }
    let mut out = grams.gram(block[0]).clone();
    for &v in &block[1..] {
        out *= grams.gram(v);
    }
    Ok(out)
}
