use alloc::format;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::features::{FeatureView, Vocabularies, NUM_FEATURES, UNK};
use super::labels::LabelInventory;
use crate::corpus::WordVectors;
use crate::numerics::gru::{gru_sequence, gru_sequence_backward};
use crate::numerics::{
    highway_combine, highway_combine_backward, ln, softmax, softmax_xent, Embedding, GruParams, GruStep, HighwayParams,
    HighwayStep, Linear, Param, Parameterized, Tensor,
};
use crate::{Error, Result};

const FEATURE_NAMES: [&str; NUM_FEATURES] =
    ["word", "pos", "deprel", "predicate", "distance", "caps", "suffix2", "suffix3", "trigger_deprel", "tree_distance"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaggerConfig {
    pub word_dim: usize,
    pub feature_dim: usize,
    /// Hidden size per direction, shared by every layer.
    pub hidden: usize,
    pub layers: usize,
}

impl Default for TaggerConfig {
    fn default() -> Self {
        TaggerConfig { word_dim: 32, feature_dim: 8, hidden: 32, layers: 4 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiGru {
    pub forward: GruParams,
    pub backward: GruParams,
}

/// Embeddings, a stack of bidirectional GRU layers joined by highway gates,
/// and a per-token projection onto the label inventory.
#[derive(Debug, Clone, PartialEq)]
pub struct ParserModel {
    pub config: TaggerConfig,
    pub vocab: Vocabularies,
    pub labels: LabelInventory,
    pub embeddings: Vec<Embedding>,
    pub layers: Vec<BiGru>,
    /// `highways[k]` joins the output of layer `k` to layer `k + 1`.
    pub highways: Vec<HighwayParams>,
    pub output: Linear,
}

#[derive(Debug, Clone)]
struct LayerCache {
    fwd: Vec<GruStep>,
    bwd: Vec<GruStep>,
    highway: Vec<HighwayStep>,
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    ids: Vec<[usize; NUM_FEATURES]>,
    layers: Vec<LayerCache>,
    top: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct Forward {
    /// `T x L` label distributions.
    pub posteriors: Tensor,
    /// `T x 2h` concatenated forward/backward states of the last layer.
    pub top_hidden: Tensor,
    pub logits: Vec<Vec<f64>>,
    pub cache: ForwardCache,
}

impl ParserModel {
    pub fn new(config: TaggerConfig, vocab: Vocabularies, labels: LabelInventory, seed: u64) -> Result<Self> {
        if config.layers == 0 || config.hidden == 0 || config.word_dim == 0 || config.feature_dim == 0 {
            return Err(Error::Config(format!("degenerate tagger config {config:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sizes = vocab.table_sizes();
        let embeddings = sizes
            .iter()
            .zip(FEATURE_NAMES)
            .enumerate()
            .map(|(i, (&n, name))| {
                let dim = if i == 0 { config.word_dim } else { config.feature_dim };
                Embedding::new(&format!("emb.{name}"), n, dim, &mut rng)
            })
            .collect();
        let input_dim = config.word_dim + (NUM_FEATURES - 1) * config.feature_dim;
        let h = config.hidden;
        let layers = (0..config.layers)
            .map(|k| {
                let n_in = if k == 0 { input_dim } else { 2 * h };
                BiGru {
                    forward: GruParams::new(&format!("gru{k}.fwd"), n_in, h, &mut rng),
                    backward: GruParams::new(&format!("gru{k}.bwd"), n_in, h, &mut rng),
                }
            })
            .collect();
        let highways = (1..config.layers).map(|k| HighwayParams::new(&format!("highway{k}"), 2 * h, &mut rng)).collect();
        let output = Linear::new("output", 2 * h, labels.len(), &mut rng);
        Ok(ParserModel { config, vocab, labels, embeddings, layers, highways, output })
    }

    pub fn input_dim(&self) -> usize {
        self.embeddings.iter().map(Embedding::dim).sum()
    }

    pub fn top_dim(&self) -> usize {
        2 * self.config.hidden
    }

    /// Copies pretrained rows into the word table; the unknown row takes the
    /// vectors' unknown entry. Returns how many vocabulary words were found.
    pub fn load_word_vectors(&mut self, vectors: &WordVectors, freeze: bool) -> Result<usize> {
        let table = &mut self.embeddings[0];
        if vectors.dim() != table.dim() {
            return Err(Error::Shape(format!("word vectors have {} dims, model expects {}", vectors.dim(), table.dim())));
        }
        let mut found = 0;
        table.table.value.row_mut(UNK).copy_from_slice(vectors.unk());
        for (id, w) in self.vocab.words.items().iter().enumerate() {
            if let Some(v) = vectors.get(w) {
                table.table.value.row_mut(id + 1).copy_from_slice(v);
                found += 1;
            }
        }
        table.frozen = freeze;
        Ok(found)
    }

    fn embed(&self, ids: &[usize; NUM_FEATURES]) -> Result<Vec<f64>> {
        let mut x = Vec::with_capacity(self.input_dim());
        for (e, &id) in self.embeddings.iter().zip(ids) {
            x.extend_from_slice(e.lookup(id)?);
        }
        Ok(x)
    }

    pub fn forward(&self, view: &FeatureView) -> Result<Forward> {
        if view.is_empty() {
            return Err(Error::Shape("empty feature view".into()));
        }
        let h = self.config.hidden;
        let mut input = view.ids.iter().map(|ids| self.embed(ids)).collect::<Result<Vec<_>>>()?;
        let mut caches = Vec::with_capacity(self.layers.len());
        for (k, layer) in self.layers.iter().enumerate() {
            let (hf, fwd) = gru_sequence(&input, &layer.forward, false)?;
            let (hb, bwd) = gru_sequence(&input, &layer.backward, true)?;
            let joined: Vec<Vec<f64>> = hf.into_iter().zip(hb).map(|(mut f, b)| {
                f.extend(b);
                f
            }).collect();
            let mut highway = Vec::new();
            let out = if k == 0 {
                joined
            } else {
                let mut out = Vec::with_capacity(joined.len());
                for (x, g) in input.iter().zip(&joined) {
                    let (o, st) = highway_combine(x, g, &self.highways[k - 1])?;
                    out.push(o);
                    highway.push(st);
                }
                out
            };
            caches.push(LayerCache { fwd, bwd, highway });
            input = out;
        }
        let logits = input.iter().map(|x| self.output.forward(x)).collect::<Result<Vec<_>>>()?;
        let post: Vec<Vec<f64>> = logits.iter().map(|l| softmax(l)).collect();
        let posteriors = Tensor::from_rows(&post)?;
        let top_hidden = Tensor::from_rows(&input)?;
        debug_assert_eq!(top_hidden.cols(), 2 * h);
        if !posteriors.is_finite() || !top_hidden.is_finite() {
            return Err(Error::Numeric("non-finite activations in forward pass".into()));
        }
        Ok(Forward { posteriors, top_hidden, logits, cache: ForwardCache { ids: view.ids.clone(), layers: caches, top: input } })
    }

    /// Accumulates gradients from per-token logit gradients and an optional
    /// extra gradient on the top hidden layer.
    pub fn backward(&mut self, cache: &ForwardCache, dlogits: &[Vec<f64>], dtop: Option<&Tensor>) {
        let h = self.config.hidden;
        let t_len = cache.top.len();
        let mut dy: Vec<Vec<f64>> = Vec::with_capacity(t_len);
        for t in 0..t_len {
            let mut d = self.output.backward(&cache.top[t], &dlogits[t]);
            if let Some(extra) = dtop {
                for (a, b) in d.iter_mut().zip(extra.row(t)) {
                    *a += b;
                }
            }
            dy.push(d);
        }
        for k in (0..self.layers.len()).rev() {
            let lc = &cache.layers[k];
            let (carry, dg): (Vec<Vec<f64>>, Vec<Vec<f64>>) = if k == 0 {
                (Vec::new(), dy)
            } else {
                let hw = &mut self.highways[k - 1];
                lc.highway.iter().zip(&dy).map(|(st, d)| highway_combine_backward(st, d, hw)).unzip()
            };
            let dhf: Vec<Vec<f64>> = dg.iter().map(|d| d[..h].to_vec()).collect();
            let dhb: Vec<Vec<f64>> = dg.iter().map(|d| d[h..].to_vec()).collect();
            let layer = &mut self.layers[k];
            let dxf = gru_sequence_backward(&lc.fwd, &dhf, &mut layer.forward, false);
            let dxb = gru_sequence_backward(&lc.bwd, &dhb, &mut layer.backward, true);
            dy = (0..t_len)
                .map(|t| {
                    let mut d: Vec<f64> = dxf[t].iter().zip(&dxb[t]).map(|(a, b)| a + b).collect();
                    if let Some(c) = carry.get(t) {
                        for (a, b) in d.iter_mut().zip(c) {
                            *a += b;
                        }
                    }
                    d
                })
                .collect();
        }
        for (ids, d) in cache.ids.iter().zip(&dy) {
            let mut off = 0;
            for (e, &id) in self.embeddings.iter_mut().zip(ids) {
                let n = e.dim();
                e.backward(id, &d[off..off + n]);
                off += n;
            }
        }
    }

    /// Per-token argmax labels, unconstrained.
    pub fn greedy_labels(posteriors: &Tensor) -> Vec<usize> {
        (0..posteriors.rows())
            .map(|t| {
                let row = posteriors.row(t);
                (0..row.len()).fold(0, |best, i| if row[i] > row[best] { i } else { best })
            })
            .collect()
    }
}

impl Parameterized for ParserModel {
    fn params(&self) -> Vec<&Param> {
        let mut out: Vec<&Param> = self.embeddings.iter().map(|e| &e.table).collect();
        for l in &self.layers {
            out.extend(l.forward.params());
            out.extend(l.backward.params());
        }
        for hw in &self.highways {
            out.extend(hw.params());
        }
        out.extend(self.output.params());
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out: Vec<&mut Param> = self.embeddings.iter_mut().map(|e| &mut e.table).collect();
        for l in &mut self.layers {
            out.extend(l.forward.params_mut());
            out.extend(l.backward.params_mut());
        }
        for hw in &mut self.highways {
            out.extend(hw.params_mut());
        }
        out.extend(self.output.params_mut());
        out
    }
}

/// Token-mean cross-entropy against `gold` label ids; accumulates gradients
/// into `model` and returns the loss with the forward pass.
pub fn loss_frame(model: &mut ParserModel, view: &FeatureView, gold: &[usize]) -> Result<(f64, Forward)> {
    let (loss, dlogits, fwd) = frame_loss_grads(model, view, gold)?;
    model.backward(&fwd.cache, &dlogits, None);
    Ok((loss, fwd))
}

pub(crate) fn frame_loss_grads(model: &ParserModel, view: &FeatureView, gold: &[usize]) -> Result<(f64, Vec<Vec<f64>>, Forward)> {
    if gold.len() != view.len() {
        return Err(Error::Shape(format!("{} gold labels for {} tokens", gold.len(), view.len())));
    }
    let fwd = model.forward(view)?;
    let scale = 1.0 / gold.len() as f64;
    let mut loss = 0.0;
    let mut dlogits = Vec::with_capacity(gold.len());
    for (l, &g) in fwd.logits.iter().zip(gold) {
        let (li, mut d) = softmax_xent(l, g)?;
        loss += li * scale;
        d.iter_mut().for_each(|x| *x *= scale);
        dlogits.push(d);
    }
    Ok((loss, dlogits, fwd))
}

/// Mean per-token negative log posterior of `gold`, without gradients.
pub fn frame_nll(posteriors: &Tensor, gold: &[usize]) -> f64 {
    gold.iter().enumerate().map(|(t, &g)| -ln(posteriors.row(t)[g])).sum::<f64>() / gold.len() as f64
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::corpus::{Coreness, FrameLexicon, Sentence, Token};
    use crate::numerics::grad_check_params;
    use crate::tagger::featurize;
    use alloc::string::ToString;
    use alloc::vec;

    pub(crate) fn tiny_lexicon() -> FrameLexicon {
        let mut lex = FrameLexicon::new();
        lex.add_frame("Attack").unwrap();
        lex.add_element("Attack", "Assailant", Coreness::Core).unwrap();
        lex.add_element("Attack", "Victim", Coreness::Core).unwrap();
        lex.add_lu("attaquer", "Attack").unwrap();
        lex
    }

    pub(crate) fn tiny_sentence(forms: &[&str]) -> Sentence {
        Sentence {
            domain: None,
            tokens: forms
                .iter()
                .enumerate()
                .map(|(i, f)| Token {
                    index: i + 1,
                    form: f.to_string(),
                    lemma: f.to_string(),
                    pos: if i == 1 { "VERB".into() } else { "NOUN".into() },
                    morph: vec![],
                    head: if i == 1 { 0 } else { 2 },
                    deprel: if i == 1 { "root".into() } else { "dep".into() },
                })
                .collect(),
            annotations: vec![],
        }
    }

    pub(crate) fn tiny_model(hidden: usize, layers: usize, seed: u64) -> (ParserModel, FeatureView) {
        let s = tiny_sentence(&["Paul", "attaque", "Rome"]);
        let vocab = Vocabularies::build([&s], None);
        let labels = LabelInventory::from_lexicon(&tiny_lexicon());
        let cfg = TaggerConfig { word_dim: 4, feature_dim: 2, hidden, layers };
        let model = ParserModel::new(cfg, vocab, labels, seed).unwrap();
        let view = featurize(&s, 2, &model.vocab);
        (model, view)
    }

    #[test]
    fn posteriors_are_distributions_and_shapes_hold() {
        let (model, view) = tiny_model(8, 4, 1);
        let f = model.forward(&view).unwrap();
        assert_eq!(f.posteriors.shape(), &[3, model.labels.len()]);
        assert_eq!(f.top_hidden.shape(), &[3, 16]);
        for t in 0..3 {
            assert!((f.posteriors.row(t).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let one = FeatureView { ids: view.ids[..1].to_vec() };
        let f1 = model.forward(&one).unwrap();
        assert_eq!(f1.posteriors.shape(), &[1, model.labels.len()]);
        assert_eq!(f1.top_hidden.shape(), &[1, 16]);
    }

    #[test]
    fn forward_is_deterministic() {
        let (model, view) = tiny_model(8, 4, 1);
        assert_eq!(model.forward(&view).unwrap().posteriors, model.forward(&view).unwrap().posteriors);
    }

    #[test]
    fn token_order_matters() {
        let (model, view) = tiny_model(8, 2, 4);
        let mut shuffled = view.clone();
        shuffled.ids.swap(0, 2);
        let a = model.forward(&view).unwrap().top_hidden;
        let b = model.forward(&shuffled).unwrap().top_hidden;
        assert_ne!(a.row(0), b.row(2));
    }

    #[test]
    fn palindrome_with_tied_directions_reverses_states() {
        let (mut model, view) = tiny_model(5, 1, 8);
        model.layers[0].backward.w.value = model.layers[0].forward.w.value.clone();
        model.layers[0].backward.u.value = model.layers[0].forward.u.value.clone();
        model.layers[0].backward.b.value = model.layers[0].forward.b.value.clone();
        let pal = FeatureView { ids: vec![view.ids[0], view.ids[1], view.ids[0]] };
        let top = model.forward(&pal).unwrap().top_hidden;
        for t in 0..3 {
            let (f, b) = top.row(t).split_at(5);
            let (rf, rb) = top.row(2 - t).split_at(5);
            assert_eq!(f, rb);
            assert_eq!(b, rf);
        }
    }

    #[test]
    fn untrained_uniform_model_loss_is_ln_l() {
        let (mut model, view) = tiny_model(4, 2, 2);
        model.output.weight.value.fill(0.0);
        let l = model.labels.len();
        let (loss, _) = loss_frame(&mut model, &view, &[1, 0, 0]).unwrap();
        assert!((loss - ln(l as f64)).abs() < 1e-12);
    }

    #[test]
    fn saturated_model_loss_is_zero() {
        let (mut model, view) = tiny_model(4, 2, 2);
        model.output.weight.value.fill(0.0);
        model.output.bias.value.fill(-40.0);
        model.output.bias.value.data_mut()[0] = 40.0;
        let (loss, _) = loss_frame(&mut model, &view, &[0, 0, 0]).unwrap();
        assert!(loss < 1e-20);
    }

    #[test]
    fn frame_loss_gradients_match_finite_differences() {
        let (mut model, view) = tiny_model(8, 4, 3);
        let gold = [3, 1, 5];
        let err = grad_check_params(&mut model, |m| Ok(loss_frame(m, &view, &gold)?.0), 1e-5).unwrap();
        assert!(err < 1e-5, "max relative error {err}");
    }

    #[test]
    fn single_instance_overfits_monotonically() {
        let (mut model, view) = tiny_model(8, 4, 5);
        let gold = [3, 1, 5];
        let mut prev = f64::INFINITY;
        for _ in 0..50 {
            model.zero_grads();
            let (loss, _) = loss_frame(&mut model, &view, &gold).unwrap();
            assert!(loss < prev, "{loss} >= {prev}");
            prev = loss;
            for p in model.params_mut() {
                let g = p.grad.data().to_vec();
                for (v, d) in p.value.data_mut().iter_mut().zip(g) {
                    *v -= 0.1 * d;
                }
            }
        }
    }

    #[test]
    fn frozen_word_vectors_get_no_gradient() {
        let (mut model, view) = tiny_model(4, 1, 2);
        let mut vecs = WordVectors::new(4);
        vecs.insert("paul", &[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(model.load_word_vectors(&vecs, true).unwrap(), 1);
        assert_eq!(model.embeddings[0].table.value.row(model.vocab.words.id("paul")), &[1.0, 0.0, 0.0, 0.0]);
        model.zero_grads();
        loss_frame(&mut model, &view, &[0, 1, 0]).unwrap();
        assert_eq!(model.embeddings[0].table.grad.sq_norm(), 0.0);
    }
}
