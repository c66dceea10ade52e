use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::SOS;
use crate::rng::SplitMix64;
use crate::scalar::Real;

/// Half-width of the uniform initialization interval.
pub const INIT_SCALE: f64 = 0.08;

/// Architecture hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelDims {
    pub embed: usize,
    /// Hidden size per direction; also the decoder and attention width.
    pub hidden: usize,
    pub encoder_layers: usize,
    pub bidirectional: bool,
}

impl Default for ModelDims {
    fn default() -> Self {
        Self {
            embed: 150,
            hidden: 300,
            encoder_layers: 2,
            bidirectional: true,
        }
    }
}

impl ModelDims {
    pub fn directions(&self) -> usize {
        if self.bidirectional {
            2
        } else {
            1
        }
    }

    /// Width of an encoder output (all directions concatenated).
    pub fn encoder_width(&self) -> usize {
        self.directions() * self.hidden
    }

    pub fn validate(&self) -> Result<()> {
        if self.embed == 0 || self.hidden == 0 || self.encoder_layers == 0 {
            return Err(Error::invalid("model dimensions must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Offsets of one LSTM's parameters. Gates are laid out `i, f, g, o`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct LstmLayout {
    pub wx: Range<usize>,
    pub wh: Range<usize>,
    pub b: Range<usize>,
    pub input: usize,
    pub hidden: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Layout {
    pub tensors: Vec<TensorSpec>,
    pub src_emb: Range<usize>,
    pub tgt_emb: Range<usize>,
    /// `[layer][direction]`
    pub encoder: Vec<Vec<LstmLayout>>,
    pub bridge_h_w: Range<usize>,
    pub bridge_h_b: Range<usize>,
    pub bridge_c_w: Range<usize>,
    pub bridge_c_b: Range<usize>,
    pub decoder: LstmLayout,
    pub attn_k: Range<usize>,
    pub out_w: Range<usize>,
    pub out_b: Range<usize>,
    pub total: usize,
}

impl Layout {
    pub fn new(dims: &ModelDims, v_src: usize, v_tgt: usize) -> Self {
        let mut tensors = Vec::new();
        let mut add = |name: String, shape: Vec<usize>| -> Range<usize> {
            let offset = tensors.last().map_or(0, |t: &TensorSpec| t.offset + t.len());
            let spec = TensorSpec { name, shape, offset };
            let r = spec.range();
            tensors.push(spec);
            r
        };
        let (e, h, d) = (dims.embed, dims.hidden, dims.encoder_width());
        let src_emb = add("src_embedding".into(), vec![v_src, e]);
        let tgt_emb = add("tgt_embedding".into(), vec![v_tgt, e]);
        let mut encoder = Vec::new();
        for l in 0..dims.encoder_layers {
            let input = if l == 0 { e } else { d };
            let mut dirs = Vec::new();
            for dir in ["fwd", "bwd"].iter().take(dims.directions()) {
                dirs.push(LstmLayout {
                    wx: add(format!("encoder.{l}.{dir}.w_x"), vec![input, 4 * h]),
                    wh: add(format!("encoder.{l}.{dir}.w_h"), vec![h, 4 * h]),
                    b: add(format!("encoder.{l}.{dir}.b"), vec![4 * h]),
                    input,
                    hidden: h,
                });
            }
            encoder.push(dirs);
        }
        let bridge_h_w = add("bridge_h.w".into(), vec![d, h]);
        let bridge_h_b = add("bridge_h.b".into(), vec![h]);
        let bridge_c_w = add("bridge_c.w".into(), vec![d, h]);
        let bridge_c_b = add("bridge_c.b".into(), vec![h]);
        let decoder = LstmLayout {
            wx: add("decoder.w_x".into(), vec![e, 4 * h]),
            wh: add("decoder.w_h".into(), vec![h, 4 * h]),
            b: add("decoder.b".into(), vec![4 * h]),
            input: e,
            hidden: h,
        };
        let attn_k = add("attention.w_k".into(), vec![d, h]);
        let out_w = add("output.w".into(), vec![2 * h, v_tgt]);
        let out_b = add("output.b".into(), vec![v_tgt]);
        let total = out_b.end;
        Self {
            tensors,
            src_emb,
            tgt_emb,
            encoder,
            bridge_h_w,
            bridge_h_b,
            bridge_c_w,
            bridge_c_b,
            decoder,
            attn_k,
            out_w,
            out_b,
            total,
        }
    }

    pub fn lstms(&self) -> impl Iterator<Item = &LstmLayout> {
        self.encoder.iter().flatten().chain(std::iter::once(&self.decoder))
    }
}

/// Attention seq2seq model: stacked (bi)LSTM encoder, linear bridge, LSTM
/// decoder, scaled dot-product attention over projected encoder outputs.
///
/// All parameters live in one flat vector; [`Seq2SeqModel::tensors`] names
/// the slices.
#[derive(Debug, Clone, PartialEq)]
pub struct Seq2SeqModel<T> {
    pub dims: ModelDims,
    pub v_src: usize,
    pub v_tgt: usize,
    pub params: Vec<T>,
    pub(crate) layout: Layout,
}

impl<T: Real> Seq2SeqModel<T> {
    /// Uniform(-0.08, 0.08) weights from a seeded generator; forget-gate
    /// biases set to 1.
    pub fn init(v_src: usize, v_tgt: usize, dims: ModelDims, seed: u64) -> Result<Self> {
        Self::init_scaled(v_src, v_tgt, dims, seed, INIT_SCALE)
    }

    /// Like [`Seq2SeqModel::init`] with weights drawn from `(-scale, scale)`.
    /// Gradient checks use a wider interval so every tensor's gradient sits
    /// well above finite-difference round-off.
    pub fn init_scaled(v_src: usize, v_tgt: usize, dims: ModelDims, seed: u64, scale: f64) -> Result<Self> {
        dims.validate()?;
        if !(scale > 0.0) {
            return Err(Error::invalid("init scale must be positive"));
        }
        if v_src < 4 || v_tgt < 4 {
            return Err(Error::invalid("vocabularies must hold at least the 4 special tokens"));
        }
        let layout = Layout::new(&dims, v_src, v_tgt);
        let mut rng = SplitMix64::new(seed);
        let bound = T::lit(scale);
        let params: Vec<T> = (0..layout.total)
            .map(|_| loop {
                let v = T::lit(rng.uniform(-scale, scale));
                if v.abs() < bound {
                    break v;
                }
            })
            .collect();
        let mut model = Self { dims, v_src, v_tgt, params, layout };
        let forget: Vec<Range<usize>> = model
            .layout
            .lstms()
            .map(|l| l.b.start + l.hidden..l.b.start + 2 * l.hidden)
            .collect();
        for r in forget {
            model.params[r].iter_mut().for_each(|b| *b = T::one());
        }
        Ok(model)
    }

    /// Rebuilds a model from a flat parameter vector in layout order.
    pub fn from_params(v_src: usize, v_tgt: usize, dims: ModelDims, params: Vec<T>) -> Result<Self> {
        dims.validate()?;
        let layout = Layout::new(&dims, v_src, v_tgt);
        if params.len() != layout.total {
            return Err(Error::DimensionMismatch { expected: layout.total, got: params.len() });
        }
        Ok(Self { dims, v_src, v_tgt, params, layout })
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn tensors(&self) -> &[TensorSpec] {
        &self.layout.tensors
    }

    pub fn tensor(&self, name: &str) -> Option<&[T]> {
        self.layout.tensors.iter().find(|t| t.name == name).map(|t| &self.params[t.range()])
    }

    /// Indices of all forget-gate bias entries.
    pub fn forget_bias_indices(&self) -> Vec<usize> {
        self.layout
            .lstms()
            .flat_map(|l| l.b.start + l.hidden..l.b.start + 2 * l.hidden)
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    pub fn cast<U: Real>(&self) -> Seq2SeqModel<U> {
        Seq2SeqModel {
            dims: self.dims,
            v_src: self.v_src,
            v_tgt: self.v_tgt,
            params: self.params.iter().map(|&p| U::lit(p.as_f64())).collect(),
            layout: self.layout.clone(),
        }
    }

    pub(crate) fn check_ids(&self, src: &[usize], tgt: &[usize]) -> Result<()> {
        if let Some(&id) = src.iter().find(|&&id| id >= self.v_src) {
            return Err(Error::invalid(format!("source id {id} outside vocabulary of {}", self.v_src)));
        }
        if let Some(&id) = tgt.iter().find(|&&id| id >= self.v_tgt) {
            return Err(Error::invalid(format!("target id {id} outside vocabulary of {}", self.v_tgt)));
        }
        if tgt.contains(&SOS) {
            return Err(Error::invalid("target sequences must not contain SOS"));
        }
        Ok(())
    }
}

/// `init_model` under the default dimensions.
pub fn init_model<T: Real>(v_src: usize, v_tgt: usize, seed: u64) -> Result<Seq2SeqModel<T>> {
    Seq2SeqModel::init(v_src, v_tgt, ModelDims::default(), seed)
}
