use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ArchSpec, ModelError, ModelSpec};
use crate::nncore::{
    conv1d_backward, conv1d_forward, cross_entropy, dense_backward, dense_softmax_forward, gradient_check, maxpool1d,
    maxpool1d_backward, Conv1dCache, Conv1dParams, DenseParams, NamedTensor, NnError, Parameters, PoolCache,
    RecurrentCache, RecurrentLayer, Tensor2,
};

#[derive(Debug, Clone, PartialEq)]
enum Body {
    Vanilla {
        rnn: RecurrentLayer,
    },
    Stacked {
        layers: Vec<RecurrentLayer>,
    },
    Cnn {
        conv: Conv1dParams,
        pool: usize,
        rnn: RecurrentLayer,
    },
    EncoderDecoder {
        encoder: RecurrentLayer,
        decoder: RecurrentLayer,
        steps: usize,
    },
}

enum BodyCache {
    Vanilla(RecurrentCache),
    Stacked(Vec<RecurrentCache>),
    Cnn {
        conv: Conv1dCache,
        pool: PoolCache,
        rnn: RecurrentCache,
    },
    EncoderDecoder {
        encoder: RecurrentCache,
        decoder: RecurrentCache,
    },
}

/// Intermediates from [`Model::forward`], consumed by [`Model::backward`].
pub struct ForwardCache {
    generation: u64,
    body: BodyCache,
    features: Vec<f64>,
    pub probs: Vec<f64>,
}

/// A sequence classifier: recurrent body followed by a softmax head on the
/// last hidden state.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    spec: ModelSpec,
    body: Body,
    head: DenseParams,
    generation: u64,
}

fn last_row_only(steps: usize, grad: &[f64]) -> Tensor2 {
    let mut d = Tensor2::zeros(steps, grad.len());
    d.row_mut(steps - 1).copy_from_slice(grad);
    d
}

/// Deterministic parameter initialization from `seed`.
pub fn build_model(spec: &ModelSpec, seed: u64) -> Result<Model, ModelError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let cell = spec.cell;
    let (body, top) = match spec.arch {
        ArchSpec::VanillaLstm => (
            Body::Vanilla {
                rnn: RecurrentLayer::init(cell, spec.features, spec.hidden, &mut rng),
            },
            spec.hidden,
        ),
        ArchSpec::StackedLstm { layers } => {
            let layers = (0..layers)
                .map(|i| {
                    let input = if i == 0 { spec.features } else { spec.hidden };
                    RecurrentLayer::init(cell, input, spec.hidden, &mut rng)
                })
                .collect();
            (Body::Stacked { layers }, spec.hidden)
        }
        ArchSpec::CnnLstm { kernels, width, pool } => (
            Body::Cnn {
                conv: Conv1dParams::init(spec.features, kernels, width, &mut rng),
                pool,
                rnn: RecurrentLayer::init(cell, kernels, spec.hidden, &mut rng),
            },
            spec.hidden,
        ),
        ArchSpec::EncoderDecoderLstm {
            encoder_hidden,
            decoder_hidden,
            decoder_steps,
        } => (
            Body::EncoderDecoder {
                encoder: RecurrentLayer::init(cell, spec.features, encoder_hidden, &mut rng),
                decoder: RecurrentLayer::init(cell, encoder_hidden, decoder_hidden, &mut rng),
                steps: decoder_steps,
            },
            decoder_hidden,
        ),
    };
    let head = DenseParams::init(top, spec.classes, &mut rng);
    Ok(Model {
        spec: spec.clone(),
        body,
        head,
        generation: 0,
    })
}

impl Model {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// Same architecture with every parameter zero; used as a gradient buffer.
    pub fn zeros_like(&self) -> Self {
        let body = match &self.body {
            Body::Vanilla { rnn } => Body::Vanilla { rnn: rnn.zeros_like() },
            Body::Stacked { layers } => Body::Stacked {
                layers: layers.iter().map(RecurrentLayer::zeros_like).collect(),
            },
            Body::Cnn { conv, pool, rnn } => Body::Cnn {
                conv: conv.zeros_like(),
                pool: *pool,
                rnn: rnn.zeros_like(),
            },
            Body::EncoderDecoder {
                encoder,
                decoder,
                steps,
            } => Body::EncoderDecoder {
                encoder: encoder.zeros_like(),
                decoder: decoder.zeros_like(),
                steps: *steps,
            },
        };
        Self {
            spec: self.spec.clone(),
            body,
            head: self.head.zeros_like(),
            generation: 0,
        }
    }

    /// Rebuild a model from named tensors written by [`Parameters::named_tensors`].
    pub fn from_named_tensors(spec: &ModelSpec, tensors: &[NamedTensor]) -> Result<Self, ModelError> {
        let mut model = build_model(spec, 0)?;
        let expected = model.named_tensors();
        if expected.len() != tensors.len() {
            return Err(ModelError::Persist(format!(
                "expected {} tensors, file has {}",
                expected.len(),
                tensors.len()
            )));
        }
        let mut flat = Vec::with_capacity(model.param_count());
        for (want, got) in expected.iter().zip(tensors) {
            if want.name != got.name || want.tensor.shape() != got.tensor.shape() {
                return Err(ModelError::Persist(format!(
                    "tensor {:?} {:?} does not match {:?} {:?}",
                    got.name,
                    got.tensor.shape(),
                    want.name,
                    want.tensor.shape()
                )));
            }
            flat.extend_from_slice(got.tensor.as_slice());
        }
        model.assign_flat(&flat)?;
        Ok(model)
    }

    pub fn zero_head(&mut self) {
        self.head = self.head.zeros_like();
        self.generation += 1;
    }

    pub fn forward(&self, x: &Tensor2) -> Result<ForwardCache, ModelError> {
        if x.shape() != (self.spec.seq_len, self.spec.features) {
            return Err(NnError::ShapeMismatch {
                context: "model input",
                expected: (self.spec.seq_len, self.spec.features),
                got: x.shape(),
            }
            .into());
        }
        let (body, features) = match &self.body {
            Body::Vanilla { rnn } => {
                let c = rnn.forward(x)?;
                let h = c.last_hidden().to_vec();
                (BodyCache::Vanilla(c), h)
            }
            Body::Stacked { layers } => {
                let mut caches: Vec<RecurrentCache> = Vec::with_capacity(layers.len());
                for layer in layers {
                    let input = match caches.last() {
                        Some(c) => c.all_hidden(),
                        None => x.clone(),
                    };
                    caches.push(layer.forward(&input)?);
                }
                let h = caches.last().expect("≥ 2 layers").last_hidden().to_vec();
                (BodyCache::Stacked(caches), h)
            }
            Body::Cnn { conv, pool, rnn } => {
                let conv_cache = conv1d_forward(conv, x)?;
                let (pooled, pool_cache) = maxpool1d(&conv_cache.output, *pool);
                let rnn_cache = rnn.forward(&pooled)?;
                let h = rnn_cache.last_hidden().to_vec();
                (
                    BodyCache::Cnn {
                        conv: conv_cache,
                        pool: pool_cache,
                        rnn: rnn_cache,
                    },
                    h,
                )
            }
            Body::EncoderDecoder {
                encoder,
                decoder,
                steps,
            } => {
                let enc = encoder.forward(x)?;
                let context = enc.last_hidden();
                let rows = vec![context.to_vec(); *steps];
                let dec = decoder.forward(&Tensor2::from_rows(&rows)?)?;
                let h = dec.last_hidden().to_vec();
                (
                    BodyCache::EncoderDecoder {
                        encoder: enc,
                        decoder: dec,
                    },
                    h,
                )
            }
        };
        let probs = dense_softmax_forward(&self.head, &features)?;
        Ok(ForwardCache {
            generation: self.generation,
            body,
            features,
            probs,
        })
    }

    pub fn predict_proba(&self, x: &Tensor2) -> Result<Vec<f64>, ModelError> {
        Ok(self.forward(x)?.probs)
    }

    /// Argmax class; ties go to the lowest id.
    pub fn predict(&self, x: &Tensor2) -> Result<usize, ModelError> {
        Ok(argmax(&self.predict_proba(x)?))
    }

    pub fn loss(&self, x: &Tensor2, label: usize) -> Result<f64, ModelError> {
        let probs = self.predict_proba(x)?;
        Ok(cross_entropy(&probs, label)?)
    }

    /// Exact gradient of the cross-entropy loss for the example that produced
    /// `cache`, laid out like [`Parameters::flatten`].
    pub fn backward(&self, cache: &ForwardCache, label: usize) -> Result<Vec<f64>, ModelError> {
        if cache.generation != self.generation {
            return Err(NnError::StaleCache.into());
        }
        if label >= self.spec.classes {
            return Err(NnError::LabelOutOfRange {
                label,
                classes: self.spec.classes,
            }
            .into());
        }
        let mut grads = self.zeros_like();
        let d_top = dense_backward(&self.head, &cache.features, &cache.probs, label, &mut grads.head);
        match (&self.body, &cache.body, &mut grads.body) {
            (Body::Vanilla { rnn }, BodyCache::Vanilla(c), Body::Vanilla { rnn: g }) => {
                rnn.backward(c, &last_row_only(c.steps(), &d_top), g);
            }
            (Body::Stacked { layers }, BodyCache::Stacked(cs), Body::Stacked { layers: gs }) => {
                let last = cs.len() - 1;
                let mut d_hidden = last_row_only(cs[last].steps(), &d_top);
                for i in (0..layers.len()).rev() {
                    d_hidden = layers[i].backward(&cs[i], &d_hidden, &mut gs[i]);
                }
            }
            (
                Body::Cnn { conv, rnn, .. },
                BodyCache::Cnn {
                    conv: cc,
                    pool: pc,
                    rnn: rc,
                },
                Body::Cnn {
                    conv: gconv, rnn: grnn, ..
                },
            ) => {
                let d_pooled = rnn.backward(rc, &last_row_only(rc.steps(), &d_top), grnn);
                let d_conv = maxpool1d_backward(pc, &d_pooled);
                conv1d_backward(conv, cc, &d_conv, gconv);
            }
            (
                Body::EncoderDecoder { encoder, decoder, .. },
                BodyCache::EncoderDecoder {
                    encoder: ec,
                    decoder: dc,
                },
                Body::EncoderDecoder {
                    encoder: ge,
                    decoder: gd,
                    ..
                },
            ) => {
                let d_dec_in = decoder.backward(dc, &last_row_only(dc.steps(), &d_top), gd);
                // the context vector feeds every decoder step
                let mut d_context = vec![0.0; d_dec_in.cols()];
                for t in 0..d_dec_in.rows() {
                    for (d, v) in d_context.iter_mut().zip(d_dec_in.row(t)) {
                        *d += v;
                    }
                }
                encoder.backward(ec, &last_row_only(ec.steps(), &d_context), ge);
            }
            _ => unreachable!("cache built by this model"),
        }
        Ok(grads.flatten())
    }

    pub fn loss_and_gradient(&self, x: &Tensor2, label: usize) -> Result<(f64, Vec<f64>), ModelError> {
        let cache = self.forward(x)?;
        let loss = cross_entropy(&cache.probs, label)?;
        let grad = self.backward(&cache, label)?;
        Ok((loss, grad))
    }

    /// Worst relative error between analytic and central-difference
    /// gradients. Models with more than 5 000 parameters are checked on a
    /// seeded random subsample of 500 coordinates.
    pub fn gradient_check(&self, x: &Tensor2, label: usize, step: f64) -> Result<f64, ModelError> {
        let (_, analytic) = self.loss_and_gradient(x, label)?;
        let subsample = (self.param_count() > 5_000).then_some((500, 0x5eed));
        Ok(gradient_check(self, &analytic, step, subsample, |m: &Model| {
            m.loss(x, label).expect("shapes checked above")
        }))
    }
}

impl Parameters for Model {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, &Tensor2)) {
        let p = |name: &str| crate::nncore::join_name(prefix, name);
        match &self.body {
            Body::Vanilla { rnn } => rnn.visit(&p("lstm"), f),
            Body::Stacked { layers } => {
                for (i, l) in layers.iter().enumerate() {
                    l.visit(&p(&format!("lstm{i}")), f);
                }
            }
            Body::Cnn { conv, rnn, .. } => {
                conv.visit(&p("conv"), f);
                rnn.visit(&p("lstm"), f);
            }
            Body::EncoderDecoder { encoder, decoder, .. } => {
                encoder.visit(&p("encoder"), f);
                decoder.visit(&p("decoder"), f);
            }
        }
        self.head.visit(&p("head"), f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Tensor2)) {
        self.generation += 1;
        match &mut self.body {
            Body::Vanilla { rnn } => rnn.visit_mut(f),
            Body::Stacked { layers } => layers.iter_mut().for_each(|l| l.visit_mut(f)),
            Body::Cnn { conv, rnn, .. } => {
                conv.visit_mut(f);
                rnn.visit_mut(f);
            }
            Body::EncoderDecoder { encoder, decoder, .. } => {
                encoder.visit_mut(f);
                decoder.visit_mut(f);
            }
        }
        self.head.visit_mut(f);
    }
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
