//! Sequential knockoffs via conditional independent pairs.
//!
//! Columns are visited in order. Each column is regressed on every other
//! original column plus the knockoffs drawn so far (categoricals enter the
//! design one-hot encoded); the knockoff is then drawn row-wise from the
//! fitted conditional: Gaussian for continuous columns, multinomial for
//! categorical ones.

use nalgebra::DMatrix;
use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{KnockoffMatrix, Provenance};
use crate::error::{Error, Result};
use crate::penalized::{
    fit_elastic_net_cv, fit_multinomial_enet_cv, MultinomialConfig, PenaltyConfig,
};
use crate::seed::rng_from_seed;
use crate::tabular::{Column, ColumnSchema, Frame};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct SequentialConfig {
    pub penalty: PenaltyConfig,
    pub multinomial: MultinomialConfig,
    /// Visiting order as a permutation of column indices; schema order if unset.
    #[serde(default)]
    pub order: Option<Vec<usize>>,
}

impl SequentialConfig {
    fn order(&self, p: usize) -> Result<Vec<usize>> {
        match &self.order {
            None => Ok((0..p).collect()),
            Some(o) => {
                let mut seen = vec![false; p];
                if o.len() != p {
                    return Err(Error::Config(format!(
                        "column order has {} entries for {p} columns",
                        o.len()
                    )));
                }
                for &j in o {
                    if j >= p || std::mem::replace(&mut seen[j], true) {
                        return Err(Error::Config("column order is not a permutation".into()));
                    }
                }
                Ok(o.clone())
            }
        }
    }
}

fn encode_column(schema: &ColumnSchema, col: &Column) -> DMatrix<f64> {
    match col {
        Column::Continuous(v) => DMatrix::from_column_slice(v.len(), 1, v),
        Column::Categorical(v) => {
            let mut m = DMatrix::zeros(v.len(), schema.width());
            for (i, &l) in v.iter().enumerate() {
                m[(i, l as usize)] = 1.0;
            }
            m
        }
    }
}

fn hstack(n: usize, blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let q: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(n, q);
    let mut off = 0;
    for b in blocks {
        out.columns_mut(off, b.ncols()).copy_from(*b);
        off += b.ncols();
    }
    out
}

fn check_level_counts(frame: &Frame, min: usize) -> Result<()> {
    for (s, c) in frame.schema().iter().zip(frame.columns()) {
        if let (Some(levels), Column::Categorical(v)) = (s.levels(), c) {
            let mut counts = vec![0usize; levels.len()];
            for &l in v {
                counts[l as usize] += 1;
            }
            if let Some((k, &count)) = counts.iter().enumerate().find(|(_, &c)| c < min) {
                return Err(Error::ClassTooRare {
                    class: levels[k].clone(),
                    count,
                    min,
                }
                .in_column(&s.name));
            }
        }
    }
    Ok(())
}

pub fn sample_sequential_knockoffs<R: RngCore + ?Sized>(
    frame: &Frame,
    cfg: &SequentialConfig,
    rng: &mut R,
) -> Result<KnockoffMatrix> {
    let n = frame.n_rows();
    let p = frame.n_cols();
    let order = cfg.order(p)?;
    check_level_counts(frame, cfg.multinomial.min_level_count)?;
    if n < 2 {
        return Err(Error::TooFewRows("sequential knockoffs need at least 2 rows".into()));
    }

    let seed = rng.next_u64();
    let mut local = rng_from_seed(seed);
    let originals: Vec<DMatrix<f64>> = frame
        .schema()
        .iter()
        .zip(frame.columns())
        .map(|(s, c)| encode_column(s, c))
        .collect();
    let mut knockoff_blocks: Vec<DMatrix<f64>> = Vec::with_capacity(p);
    let mut knockoff_cols: Vec<Option<Column>> = vec![None; p];

    for &j in &order {
        let blocks: Vec<&DMatrix<f64>> = originals
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != j)
            .map(|(_, b)| b)
            .chain(knockoff_blocks.iter())
            .collect();
        let design = hstack(n, &blocks);
        let schema = &frame.schema()[j];
        let col = match frame.column(j) {
            Column::Continuous(v) => {
                let fit = fit_elastic_net_cv(&design, v, &cfg.penalty, &mut local)
                    .map_err(|e| e.in_column(&schema.name))?;
                let mean = fit.predict(&design);
                Column::Continuous(
                    mean.into_iter()
                        .map(|mu| mu + fit.residual_sd * local.sample::<f64, _>(StandardNormal))
                        .collect(),
                )
            }
            Column::Categorical(v) => {
                let k = schema.width();
                let fit = fit_multinomial_enet_cv(
                    &design,
                    v,
                    k,
                    &cfg.penalty,
                    &cfg.multinomial,
                    &mut local,
                )
                .map_err(|e| e.in_column(&schema.name))?;
                let mut row = vec![0.0; design.ncols()];
                let mut draws = Vec::with_capacity(n);
                for i in 0..n {
                    for (c, r) in row.iter_mut().enumerate() {
                        *r = design[(i, c)];
                    }
                    let probs = fit.probabilities(&row);
                    let dist = WeightedIndex::new(&probs).map_err(|e| {
                        Error::Numeric(format!("bad class probabilities: {e}"))
                            .in_column(&schema.name)
                    })?;
                    draws.push(dist.sample(&mut local) as u32);
                }
                Column::Categorical(draws)
            }
        };
        knockoff_blocks.push(encode_column(schema, &col));
        knockoff_cols[j] = Some(col);
    }

    let columns = knockoff_cols
        .into_iter()
        .map(|c| c.expect("every column visited"))
        .collect();
    Ok(KnockoffMatrix {
        frame: Frame::new(frame.schema().to_vec(), columns)?,
        provenance: Provenance::Sequential,
        seed,
    })
}
