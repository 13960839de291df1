//! The neural semi-CRF: encoder, segment composition, segment and label
//! embeddings, and the segment scorer.
//!
//! `S = relu(W_c SComp + W_s SEmb + W_y E^Y_y + b)` and the segment score is
//! `w . S`. The label term does not depend on the span, so it is computed
//! once per label and added to each span's part.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::composition::{CompositionKind, Composer};
use crate::embedding::{default_separator, dim_mismatch, segment_key, BoundTable, EmbeddingTable, Vocab};
use crate::encoder::{Encoder, EncoderDims};
use crate::params::{embedding_uniform, glorot_uniform};
use crate::segment::TaskKind;
use crate::semicrf::{self, SegmentLattice};
use crate::trainer::TrainConfig;
use crate::{Error, Graph, LabelSet, NodeId, ParamId, ParamStore, Result, Segment, Segmentation, Tensor};

/// Every model and training setting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub task: TaskKind,
    pub composition: CompositionKind,
    /// Longest segment considered; `None` means the longest gold segment
    /// in the training data.
    pub max_segment_len: Option<usize>,
    pub unit_pretrained_dim: usize,
    pub unit_tuned_dim: usize,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub scomp_dim: usize,
    pub semb_dim: usize,
    pub label_dim: usize,
    pub segment_dim: usize,
    /// Pretrained unit embeddings (text format). Missing means all zero.
    pub unit_embeddings: Option<String>,
    /// Pretrained segment embeddings (text format). When segment embeddings
    /// are enabled without a file, a randomly initialised lexicon of gold
    /// training segments is used.
    pub segment_embeddings: Option<String>,
    pub use_segment_embeddings: bool,
    pub finetune_unit_embeddings: bool,
    pub finetune_segment_embeddings: bool,
    /// Joins units into segment keys; defaults to `_` for span-labeled
    /// tasks and the empty string for word segmentation.
    pub separator: Option<String>,
    /// Fold full-width digits and letters to ASCII when reading text.
    pub normalize_fullwidth: bool,
    pub seed: u64,
    pub train: TrainConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            task: TaskKind::SpanLabeled,
            composition: CompositionKind::Sconcate,
            max_segment_len: None,
            unit_pretrained_dim: 100,
            unit_tuned_dim: 32,
            input_dim: 100,
            hidden_dim: 100,
            scomp_dim: 64,
            semb_dim: 50,
            label_dim: 20,
            segment_dim: 100,
            unit_embeddings: None,
            segment_embeddings: None,
            use_segment_embeddings: false,
            finetune_unit_embeddings: false,
            finetune_segment_embeddings: false,
            separator: None,
            normalize_fullwidth: false,
            seed: 1,
            train: TrainConfig::default(),
        }
    }
}

impl ModelConfig {
    pub fn separator(&self) -> &str {
        self.separator.as_deref().unwrap_or_else(|| default_separator(self.task))
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("unit_pretrained_dim", self.unit_pretrained_dim),
            ("unit_tuned_dim", self.unit_tuned_dim),
            ("input_dim", self.input_dim),
            ("hidden_dim", self.hidden_dim),
            ("scomp_dim", self.scomp_dim),
            ("semb_dim", self.semb_dim),
            ("label_dim", self.label_dim),
            ("segment_dim", self.segment_dim),
        ];
        for (name, d) in dims {
            if d == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.max_segment_len == Some(0) {
            return Err(Error::Config("max_segment_len must be positive".into()));
        }
        self.train.validate()
    }
}

/// Where segment embeddings come from.
#[derive(Clone, Debug)]
pub enum SegmentSource {
    Disabled,
    Pretrained(EmbeddingTable),
    /// Random initialisation over a lexicon (typically the gold training
    /// segments).
    Lexicon(Vocab),
}

/// Embedding resources that are not derived from the configuration alone.
#[derive(Clone, Debug)]
pub struct Resources {
    pub unit_pretrained: Option<EmbeddingTable>,
    /// Vocabulary of the fine-tuned unit table.
    pub unit_vocab: Vocab,
    pub segments: SegmentSource,
}

/// Maps `(SComp, SEmb, label)` to the final segment representation.
#[derive(Clone, Debug)]
pub struct SegmentLayer {
    w_comp: ParamId,
    w_emb: Option<ParamId>,
    w_label: ParamId,
    bias: ParamId,
    label_emb: ParamId,
    table: Option<BoundTable>,
}

impl SegmentLayer {
    fn new(
        store: &mut ParamStore,
        rng: &mut ChaCha8Rng,
        cfg: &ModelConfig,
        num_labels: usize,
        table: Option<BoundTable>,
    ) -> Result<Self> {
        let label_emb = store.add("emb.label", embedding_uniform(rng, num_labels, cfg.label_dim), true)?;
        let w_comp = store.add("segment.w_comp", glorot_uniform(rng, cfg.segment_dim, cfg.scomp_dim), true)?;
        let w_emb = match &table {
            Some(_) => Some(store.add("segment.w_emb", glorot_uniform(rng, cfg.segment_dim, cfg.semb_dim), true)?),
            None => None,
        };
        let w_label = store.add("segment.w_label", glorot_uniform(rng, cfg.segment_dim, cfg.label_dim), true)?;
        let bias = store.add("segment.b", Tensor::zeros(&[cfg.segment_dim]), true)?;
        Ok(Self {
            w_comp,
            w_emb,
            w_label,
            bias,
            label_emb,
            table,
        })
    }

    pub fn table(&self) -> Option<&BoundTable> {
        self.table.as_ref()
    }

    /// `W_c SComp + W_s SEmb`; the embedding term is dropped when segment
    /// embeddings are disabled.
    pub fn span_part(&self, g: &mut Graph<'_>, scomp: NodeId, semb: Option<NodeId>) -> Result<NodeId> {
        let wc = g.param(self.w_comp)?;
        let a = g.matvec(wc, scomp)?;
        match (self.w_emb, semb) {
            (Some(ws), Some(e)) => {
                let ws = g.param(ws)?;
                let b = g.matvec(ws, e)?;
                g.add(&[a, b])
            }
            (None, None) => Ok(a),
            _ => Err(Error::Config("segment embedding given but not configured (or missing)".into())),
        }
    }

    /// `W_y E^Y_y + b`.
    pub fn label_part(&self, g: &mut Graph<'_>, label: usize) -> Result<NodeId> {
        let e = g.row(self.label_emb, label)?;
        let wy = g.param(self.w_label)?;
        let b = g.param(self.bias)?;
        let a = g.matvec(wy, e)?;
        g.add(&[a, b])
    }

    pub fn combine(&self, g: &mut Graph<'_>, span_part: NodeId, label_part: NodeId) -> Result<NodeId> {
        let z = g.add(&[span_part, label_part])?;
        Ok(g.relu(z))
    }

    /// Final representation `S` of one labeled segment.
    pub fn segment_repr(&self, g: &mut Graph<'_>, scomp: NodeId, semb: Option<NodeId>, label: usize) -> Result<NodeId> {
        let s = self.span_part(g, scomp, semb)?;
        let l = self.label_part(g, label)?;
        self.combine(g, s, l)
    }
}

/// Anything that segments a token sequence.
pub trait Segmenter {
    fn segment(&self, tokens: &[String]) -> Result<Segmentation>;
}

#[derive(Clone, Debug)]
pub struct Model {
    config: ModelConfig,
    labels: LabelSet,
    store: ParamStore,
    encoder: Encoder,
    composer: Composer,
    segment: SegmentLayer,
    score: ParamId,
    max_len: usize,
}

/// Vocabularies needed to rebuild a model around saved parameters.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocabularies {
    pub unit_pretrained: Vocab,
    pub unit_tuned: Vocab,
    pub segment: Option<Vocab>,
}

impl Model {
    /// Builds and randomly initialises a model. `config.max_segment_len`
    /// must be resolved.
    pub fn new(config: ModelConfig, labels: LabelSet, resources: Resources) -> Result<Self> {
        config.validate()?;
        let max_len = config
            .max_segment_len
            .ok_or_else(|| Error::Config("max_segment_len is not resolved".into()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();

        let mut pretrained = match resources.unit_pretrained {
            Some(t) => t,
            None => EmbeddingTable::empty(config.unit_pretrained_dim)?,
        };
        pretrained.set_trainable(config.finetune_unit_embeddings);
        let tuned_matrix = embedding_uniform(&mut rng, resources.unit_vocab.len() + 1, config.unit_tuned_dim);
        let tuned = EmbeddingTable::from_parts(resources.unit_vocab, tuned_matrix, true)?;
        let dims = EncoderDims {
            unit_pretrained: config.unit_pretrained_dim,
            unit_tuned: config.unit_tuned_dim,
            input: config.input_dim,
            hidden: config.hidden_dim,
        };
        let encoder = Encoder::new(&mut store, &mut rng, dims, pretrained, tuned)?;
        let composer = Composer::new(
            config.composition,
            &mut store,
            &mut rng,
            config.hidden_dim,
            config.scomp_dim,
            max_len,
        )?;

        let seg_table = match (config.use_segment_embeddings, resources.segments) {
            (false, _) => None,
            (true, SegmentSource::Disabled) => {
                return Err(Error::Config("segment embeddings enabled without a source".into()));
            }
            (true, SegmentSource::Pretrained(mut t)) => {
                if t.dim() != config.semb_dim {
                    return Err(dim_mismatch("segment embeddings", config.semb_dim, t.dim()));
                }
                t.set_trainable(config.finetune_segment_embeddings);
                Some(BoundTable::register(&mut store, "emb.segment", t)?)
            }
            (true, SegmentSource::Lexicon(vocab)) => {
                let m = embedding_uniform(&mut rng, vocab.len() + 1, config.semb_dim);
                let t = EmbeddingTable::from_parts(vocab, m, config.finetune_segment_embeddings)?;
                Some(BoundTable::register(&mut store, "emb.segment", t)?)
            }
        };
        let segment = SegmentLayer::new(&mut store, &mut rng, &config, labels.len(), seg_table)?;
        let score = store.add("score.w", glorot_uniform(&mut rng, config.segment_dim, 1), true)?;
        Ok(Self {
            config,
            labels,
            store,
            encoder,
            composer,
            segment,
            score,
            max_len,
        })
    }

    /// Rebuilds a model from vocabularies and saved parameter values. Every
    /// parameter must be present with the expected shape.
    pub fn restore(
        config: ModelConfig,
        labels: LabelSet,
        vocabs: Vocabularies,
        values: impl IntoIterator<Item = (String, Tensor)>,
    ) -> Result<Self> {
        let zeros = |vocab: Vocab, dim: usize| {
            let rows = vocab.len() + 1;
            EmbeddingTable::from_parts(vocab, Tensor::zeros(&[rows, dim]), false)
        };
        let segments = match vocabs.segment {
            Some(v) if config.use_segment_embeddings => SegmentSource::Pretrained(zeros(v, config.semb_dim)?),
            None if !config.use_segment_embeddings => SegmentSource::Disabled,
            _ => return Err(Error::Config("segment vocabulary does not match configuration".into())),
        };
        let resources = Resources {
            unit_pretrained: Some(zeros(vocabs.unit_pretrained, config.unit_pretrained_dim)?),
            unit_vocab: vocabs.unit_tuned,
            segments,
        };
        let mut model = Self::new(config, labels, resources)?;
        let mut seen = alloc::vec![false; model.store.len()];
        for (name, value) in values {
            let id = model
                .store
                .id(&name)
                .ok_or_else(|| Error::Config(format!("unexpected parameter {name}")))?;
            let p = model.store.get_mut(id);
            if p.value.shape() != value.shape() {
                return Err(Error::Dimension {
                    op: "restore",
                    left: p.value.shape().to_vec(),
                    right: value.shape().to_vec(),
                });
            }
            p.value = value;
            seen[id.index()] = true;
        }
        if let Some((id, _)) = seen.iter().enumerate().find(|(_, s)| !**s) {
            let name = model.store.get(ParamId(id)).name.clone();
            return Err(Error::Config(format!("parameter {name} missing")));
        }
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn max_segment_len(&self) -> usize {
        self.max_len
    }

    pub fn separator(&self) -> &str {
        self.config.separator()
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn composer(&self) -> &Composer {
        &self.composer
    }

    pub fn segment_layer(&self) -> &SegmentLayer {
        &self.segment
    }

    pub fn score_weight(&self) -> ParamId {
        self.score
    }

    pub fn vocabularies(&self) -> Vocabularies {
        Vocabularies {
            unit_pretrained: self.encoder.pretrained().vocab().clone(),
            unit_tuned: self.encoder.tuned().vocab().clone(),
            segment: self.segment.table().map(|t| t.vocab().clone()),
        }
    }

    /// Segment embedding table parameter, when enabled.
    pub fn segment_embedding_param(&self) -> Option<ParamId> {
        self.segment.table().map(BoundTable::param)
    }

    /// Scores every admissible `(start, end, label)` of `tokens`.
    pub fn lattice<S: AsRef<str>>(&self, g: &mut Graph<'_>, tokens: &[S]) -> Result<SegmentLattice<NodeId>> {
        let n = tokens.len();
        let enc = self.encoder.encode(g, tokens)?;
        let span_len = self.max_len.min(n);
        let spans = self.composer.compose_all(g, &enc.units, span_len)?;
        let label_parts = (0..self.labels.len())
            .map(|y| self.segment.label_part(g, y))
            .collect::<Result<Vec<_>>>()?;
        let w = g.param(self.score)?;
        let sep = self.config.separator();
        let mut lat = SegmentLattice::new(n, self.max_len, self.labels.len())?;
        for end in 1..=n {
            for len in 1..=span_len.min(end) {
                let start = end - len;
                let scomp = spans
                    .get(start, len)
                    .ok_or_else(|| Error::Precondition(format!("missing span {start}..{end}")))?;
                let semb = match self.segment.table() {
                    Some(t) => {
                        let key = segment_key(&tokens[start..end], sep)?;
                        Some(t.lookup(g, key.as_str())?)
                    }
                    None => None,
                };
                let part = self.segment.span_part(g, scomp, semb)?;
                for (y, &lp) in label_parts.iter().enumerate() {
                    let s = self.segment.combine(g, part, lp)?;
                    let score = semicrf::segment_score(g, w, s)?;
                    lat.set(Segment::new(start, end, y), score)?;
                }
            }
        }
        Ok(lat)
    }

    /// Negative log-likelihood of the gold segmentation.
    pub fn loss<S: AsRef<str>>(&self, g: &mut Graph<'_>, tokens: &[S], gold: &Segmentation) -> Result<NodeId> {
        let lat = self.lattice(g, tokens)?;
        semicrf::nll(g, &lat, gold)
    }

    /// Best segmentation; empty input gives an empty segmentation.
    pub fn decode<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Segmentation> {
        if tokens.is_empty() {
            return Ok(Segmentation::default());
        }
        let mut g = Graph::inference(&self.store);
        let lat = self.lattice(&mut g, tokens)?;
        Ok(semicrf::viterbi(&lat.values(&g))?.0)
    }
}

impl Segmenter for Model {
    fn segment(&self, tokens: &[String]) -> Result<Segmentation> {
        self.decode(tokens)
    }
}
