//! Family forests parsed from classification strings, the forest statistics,
//! and the tree-based k-neighbor metric.
//!
//! A classification string is a comma-separated path from family root to the
//! most specific subgroup, e.g. `Cariban, Guianan, Macro-Tupi`. Languages
//! sharing a path prefix share the corresponding tree nodes; only input
//! languages become leaves.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::corpus::{LanguageId, LanguageRecord, TreeSource};
use crate::embed::{nearest_neighbors, DistanceMatrix};

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("classification string is empty")]
    EmptyClassification,
    #[error("empty label at position {position} in classification {raw:?}")]
    EmptyLabel { position: usize, raw: String },
    #[error("language {0} has no classification for source {1}")]
    MissingClassification(LanguageId, TreeSource),
    #[error("language {0} is not covered by the distance matrix")]
    UnknownId(LanguageId),
    #[error("k = {k} out of range 1..={max}")]
    KOutOfRange { k: usize, max: usize },
    #[error("forest has no languages")]
    EmptyForest,
    #[error(transparent)]
    Neighbors(#[from] crate::embed::EmbedError),
}

/// Split a classification string into its ordered label path.
///
/// Labels are comma-separated and trimmed; empty labels (including ones
/// produced by leading/trailing commas) are rejected with their position.
pub fn parse_classification(raw: &str) -> Result<Vec<String>, TreeError> {
    if raw.trim().is_empty() {
        return Err(TreeError::EmptyClassification);
    }
    let mut path = Vec::new();
    for (position, part) in raw.split(',').enumerate() {
        let label = part.trim();
        if label.is_empty() {
            return Err(TreeError::EmptyLabel {
                position,
                raw: raw.to_owned(),
            });
        }
        path.push(label.to_owned());
    }
    Ok(path)
}

/// One node of a family tree. `languages` holds the leaves attached at this
/// node (languages whose classification path ends here).
#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub label: String,
    pub children: BTreeMap<String, TreeNode>,
    pub languages: Vec<LanguageId>,
}

impl TreeNode {
    fn new(label: &str) -> Self {
        Self {
            label: label.to_owned(),
            children: BTreeMap::new(),
            languages: Vec::new(),
        }
    }

    /// Number of language leaves in this subtree.
    pub fn leaf_count(&self) -> usize {
        self.languages.len()
            + self
                .children
                .values()
                .map(TreeNode::leaf_count)
                .sum::<usize>()
    }
}

/// The parsed forest for one tree source.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyForest {
    pub source: TreeSource,
    /// Root trees ordered by family label.
    pub trees: Vec<TreeNode>,
    membership: BTreeMap<LanguageId, String>,
    families: BTreeMap<String, Vec<LanguageId>>,
    path_lengths: BTreeMap<LanguageId, usize>,
}

impl FamilyForest {
    /// Root family label of a language.
    pub fn family_of(&self, id: &LanguageId) -> Option<&str> {
        self.membership.get(id).map(String::as_str)
    }

    /// Members of a family, sorted by id.
    pub fn family_members(&self, family: &str) -> &[LanguageId] {
        self.families.get(family).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn membership(&self) -> &BTreeMap<LanguageId, String> {
        &self.membership
    }

    pub fn n_languages(&self) -> usize {
        self.membership.len()
    }

    /// A language is single if it is the only leaf of its tree.
    pub fn is_single(&self, id: &LanguageId) -> bool {
        self.family_of(id)
            .map(|f| self.family_members(f).len() == 1)
            .unwrap_or(true)
    }

    /// Non-single languages, sorted by id.
    pub fn eligible_languages(&self) -> Vec<LanguageId> {
        self.membership
            .keys()
            .filter(|id| !self.is_single(id))
            .cloned()
            .collect()
    }
}

/// Merge each language's classification path for `source` into a forest.
pub fn build_forest(
    languages: &[LanguageRecord],
    source: TreeSource,
) -> Result<FamilyForest, TreeError> {
    let mut roots: BTreeMap<String, TreeNode> = BTreeMap::new();
    let mut membership = BTreeMap::new();
    let mut families: BTreeMap<String, Vec<LanguageId>> = BTreeMap::new();
    let mut path_lengths = BTreeMap::new();

    for lang in languages {
        let path = lang
            .classifications
            .get(&source)
            .ok_or_else(|| TreeError::MissingClassification(lang.id.clone(), source))?;
        debug_assert!(!path.is_empty());
        let root_label = &path[0];
        let mut node = roots
            .entry(root_label.clone())
            .or_insert_with(|| TreeNode::new(root_label));
        for label in &path[1..] {
            node = node
                .children
                .entry(label.clone())
                .or_insert_with(|| TreeNode::new(label));
        }
        node.languages.push(lang.id.clone());
        membership.insert(lang.id.clone(), root_label.clone());
        families
            .entry(root_label.clone())
            .or_default()
            .push(lang.id.clone());
        path_lengths.insert(lang.id.clone(), path.len());
    }

    if membership.is_empty() {
        return Err(TreeError::EmptyForest);
    }
    for members in families.values_mut() {
        members.sort();
    }
    Ok(FamilyForest {
        source,
        trees: roots.into_values().collect(),
        membership,
        families,
        path_lengths,
    })
}

/// Forest-level counts: how many languages have at least one family member,
/// how many multi-language families exist, and how many isolates.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestStats {
    pub n_languages: usize,
    pub n_non_single: usize,
    pub pct_non_single: f64,
    /// Trees with at least two leaves.
    pub n_families: usize,
    /// Singleton trees whose language's classification path has length 1:
    /// the source gave it no subgrouping at all, the structural signature of
    /// an isolate. Singleton trees with deeper paths count as single but not
    /// isolate.
    pub n_isolates: usize,
}

pub fn forest_stats(forest: &FamilyForest) -> ForestStats {
    let n_languages = forest.n_languages();
    let mut n_non_single = 0;
    let mut n_families = 0;
    let mut n_isolates = 0;
    for members in forest.families.values() {
        if members.len() >= 2 {
            n_families += 1;
            n_non_single += members.len();
        } else if forest.path_lengths[&members[0]] == 1 {
            n_isolates += 1;
        }
    }
    ForestStats {
        n_languages,
        n_non_single,
        pct_non_single: 100.0 * n_non_single as f64 / n_languages as f64,
        n_families,
        n_isolates,
    }
}

/// Percentage of non-single languages with at least one family member among
/// their k nearest embedding neighbors, for each requested k.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeMetricReport {
    pub k_values: Vec<usize>,
    /// Parallel to `k_values`, in percent.
    pub hit_rates: Vec<f64>,
    pub n_eligible: usize,
}

pub fn tree_metric(
    forest: &FamilyForest,
    emb: &DistanceMatrix,
    k_values: &[usize],
) -> Result<TreeMetricReport, TreeError> {
    let n = emb.len();
    for id in forest.membership.keys() {
        if emb.index_of(id).is_none() {
            return Err(TreeError::UnknownId(id.clone()));
        }
    }
    for &k in k_values {
        if k == 0 || k > n - 1 {
            return Err(TreeError::KOutOfRange { k, max: n - 1 });
        }
    }

    let eligible = forest.eligible_languages();
    let mut hit_rates = Vec::with_capacity(k_values.len());
    for &k in k_values {
        let mut hits = 0usize;
        for id in &eligible {
            let family = forest.family_of(id).unwrap();
            let neighbors = nearest_neighbors(emb, id, k)?;
            if neighbors
                .iter()
                .any(|n| forest.family_of(n) == Some(family))
            {
                hits += 1;
            }
        }
        hit_rates.push(100.0 * hits as f64 / eligible.len() as f64);
    }
    Ok(TreeMetricReport {
        k_values: k_values.to_vec(),
        hit_rates,
        n_eligible: eligible.len(),
    })
}
