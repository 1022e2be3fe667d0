//! Topic extraction against the debate vocabulary and the mean topic vector.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::corpus::Article;
use crate::skipgram::WordEmbeddingModel;
use crate::text::tokenize;

/// Topics of one article, in text order. Repeats are kept so the mean is
/// frequency weighted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicSet {
    pub article_id: String,
    pub topics: Vec<String>,
}

/// Tokens of the article text that are not stopwords and are in the
/// embedding vocabulary.
pub fn extract_topics(article: &Article, model: &WordEmbeddingModel, stopwords: &HashSet<String>) -> TopicSet {
    TopicSet {
        article_id: article.id.clone(),
        topics: extract_topic_tokens(&article.text(), model, stopwords),
    }
}

pub fn extract_topic_tokens(text: &str, model: &WordEmbeddingModel, stopwords: &HashSet<String>) -> Vec<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| !stopwords.contains(t) && model.contains(t))
        .collect()
}

/// Arithmetic mean of the topic vectors; the zero vector when there are no
/// topics. Topics absent from the model are skipped.
pub fn topic_mean_vector(topic_set: &TopicSet, model: &WordEmbeddingModel) -> Vec<f64> {
    mean_of_tokens(&topic_set.topics, model)
}

pub fn mean_of_tokens(tokens: &[String], model: &WordEmbeddingModel) -> Vec<f64> {
    let mut sum = vec![0.0; model.dim()];
    let mut n = 0usize;
    for t in tokens {
        if let Some(v) = model.vector(t) {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
            n += 1;
        }
    }
    if n > 0 {
        let n = n as f64;
        sum.iter_mut().for_each(|s| *s /= n);
    }
    sum
}
