//! Text backbone producing mean-pooled token representations.
//!
//! This is the deterministic hashing stub used in place of a pretrained
//! transformer: every token maps to a pseudo-random vector derived from the
//! backbone name and the token's FNV hash. Rows that training touches are
//! materialized and become trainable parameters; untouched rows are
//! regenerated on demand, so the "pretrained" table costs no memory.

use std::borrow::Cow;
use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{fnv1a64, tokenize};

/// Names accepted by [`load_backbone`] with their hidden width.
pub const KNOWN_BACKBONES: &[(&str, usize)] = &[
    ("bert-base", 768),
    ("roberta-base", 768),
    ("distilbert-base", 768),
];

pub const DEFAULT_MAX_TOKENS: usize = 512;

const CLS: &str = "[CLS]";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Backbone {
    pub name: String,
    pub width: usize,
    pub max_tokens: usize,
    salt: u64,
    rows: BTreeMap<u64, Vec<f64>>,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Per-token gradient rows, keyed by token id.
pub type SparseGrad = HashMap<u64, Vec<f64>>;

pub fn load_backbone(name: &str) -> Result<Backbone> {
    let width = KNOWN_BACKBONES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, w)| *w)
        .ok_or_else(|| Error::BackboneLoad(name.to_owned()))?;
    Backbone::with_width(name, width, DEFAULT_MAX_TOKENS)
}

impl Backbone {
    /// A stub of arbitrary width; `name` must still be a known backbone.
    pub fn with_width(name: &str, width: usize, max_tokens: usize) -> Result<Self> {
        if !KNOWN_BACKBONES.iter().any(|(n, _)| *n == name) || width == 0 || max_tokens == 0 {
            return Err(Error::BackboneLoad(format!(
                "{name} (width {width}, max_tokens {max_tokens})"
            )));
        }
        Ok(Backbone {
            name: name.to_owned(),
            width,
            max_tokens,
            salt: fnv1a64(name.as_bytes()),
            rows: BTreeMap::new(),
        })
    }

    /// Token ids for `text`, truncated to `max_tokens`. Text with no tokens
    /// becomes the single `[CLS]` special token.
    pub fn token_ids(&self, text: &str) -> Vec<u64> {
        let mut ids: Vec<u64> = tokenize(text)
            .iter()
            .take(self.max_tokens)
            .map(|t| fnv1a64(t.as_bytes()))
            .collect();
        if ids.is_empty() {
            ids.push(fnv1a64(CLS.as_bytes()));
        }
        ids
    }

    fn initial_row(&self, id: u64) -> Vec<f64> {
        let bound = (3.0 / self.width as f64).sqrt();
        let base = splitmix64(self.salt ^ id.rotate_left(17));
        (0..self.width as u64)
            .map(|j| {
                let bits = splitmix64(base ^ j.wrapping_mul(0xd1b5_4a32_d192_ed03));
                let unit = (bits >> 11) as f64 / (1u64 << 53) as f64;
                (2.0 * unit - 1.0) * bound
            })
            .collect()
    }

    /// Final-layer representation of one token.
    pub fn token_vector(&self, id: u64) -> Cow<'_, [f64]> {
        match self.rows.get(&id) {
            Some(row) => Cow::Borrowed(row),
            None => Cow::Owned(self.initial_row(id)),
        }
    }

    /// Mean over token representations.
    pub fn pool(&self, ids: &[u64]) -> Vec<f64> {
        let mut out = vec![0.0; self.width];
        for &id in ids {
            for (o, x) in out.iter_mut().zip(self.token_vector(id).iter()) {
                *o += x;
            }
        }
        let n = ids.len().max(1) as f64;
        out.iter_mut().for_each(|o| *o /= n);
        out
    }

    /// Adds `d pool / d row` contributions of `grad_pooled` into `grad`.
    pub fn accumulate_grad(&self, ids: &[u64], grad_pooled: &[f64], scale: f64, grad: &mut SparseGrad) {
        let s = scale / ids.len().max(1) as f64;
        for &id in ids {
            let row = grad.entry(id).or_insert_with(|| vec![0.0; self.width]);
            for (r, g) in row.iter_mut().zip(grad_pooled) {
                *r += s * g;
            }
        }
    }

    /// Mutable access to a row, materializing it from its hash if needed.
    pub fn row_mut(&mut self, id: u64) -> &mut Vec<f64> {
        if !self.rows.contains_key(&id) {
            let row = self.initial_row(id);
            self.rows.insert(id, row);
        }
        self.rows.get_mut(&id).expect("row present")
    }

    pub fn trained_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn is_finite(&self) -> bool {
        self.rows.values().flatten().all(|x| x.is_finite())
    }
}

/// Mean-pooled representation of an article text.
pub fn base_representation(text: &str, backbone: &Backbone) -> Vec<f64> {
    backbone.pool(&backbone.token_ids(text))
}

/// Same path as [`base_representation`], applied to Wikipedia text.
pub fn wiki_representation(wiki_text: &str, backbone: &Backbone) -> Vec<f64> {
    base_representation(wiki_text, backbone)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_widths() {
        for (name, _) in KNOWN_BACKBONES {
            let b = load_backbone(name).unwrap();
            assert_eq!(base_representation("any text at all", &b).len(), 768);
        }
        assert!(matches!(load_backbone("gpt-9"), Err(Error::BackboneLoad(_))));
    }

    #[test]
    fn single_token_is_identity_of_mean() {
        let b = load_backbone("bert-base").unwrap();
        let ids = b.token_ids("senate");
        assert_eq!(ids.len(), 1);
        assert_eq!(base_representation("senate", &b), b.token_vector(ids[0]).to_vec());
    }

    #[test]
    fn different_texts_differ() {
        let b = load_backbone("bert-base").unwrap();
        let a = base_representation("tax cuts for the rich", &b);
        let c = base_representation("climate policy and renewables", &b);
        let dist: f64 = a.iter().zip(&c).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        assert!(dist > 0.0);
    }

    #[test]
    fn empty_text_is_finite_cls_vector() {
        let b = load_backbone("roberta-base").unwrap();
        let v = wiki_representation("", &b);
        assert_eq!(v.len(), 768);
        assert!(v.iter().all(|x| x.is_finite()));
        assert_eq!(v, wiki_representation("  ...  ", &b));
        assert_eq!(v, wiki_representation("", &b));
    }

    #[test]
    fn truncates_to_max_tokens() {
        let b = Backbone::with_width("bert-base", 4, 3).unwrap();
        assert_eq!(b.token_ids("a b c d e").len(), 3);
        assert_eq!(base_representation("a b c d e", &b), base_representation("a b c", &b));
    }

    #[test]
    fn backbones_differ_by_name() {
        let a = load_backbone("bert-base").unwrap();
        let b = load_backbone("distilbert-base").unwrap();
        assert_ne!(base_representation("news", &a), base_representation("news", &b));
    }

    #[test]
    fn materialized_row_matches_generated_row() {
        let mut b = Backbone::with_width("bert-base", 8, 16).unwrap();
        let id = b.token_ids("vote")[0];
        let generated = b.token_vector(id).to_vec();
        assert_eq!(b.row_mut(id).clone(), generated);
        assert_eq!(b.trained_rows(), 1);
    }
}
