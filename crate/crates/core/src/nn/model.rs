use rayon::prelude::*;

use super::layer::{five_layer_specs, LayerSpec};
use super::loss::{cross_entropy_single, softmax};
use crate::error::{Error, Result};
use crate::kernels::{conv2d_backward_opt, conv2d_forward, maxpool2d_backward, maxpool2d_forward};
use crate::rng::Rng;
use crate::tensor::{Real, Tensor};

/// Weight and bias of one parameterized layer.
///
/// Conv weights are `(K, K, Cin, Cout)`, dense weights `(In, Out)`; biases
/// have one entry per output channel/unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<T = f32> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Real> Params<T> {
    pub fn zeros_like(&self) -> Self {
        Self {
            weight: Tensor::zeros(self.weight.shape()),
            bias: Tensor::zeros(self.bias.shape()),
        }
    }

    pub fn len(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cast<U: Real>(&self) -> Params<U> {
        Params {
            weight: self.weight.cast(),
            bias: self.bias.cast(),
        }
    }
}

/// Parameter gradients, laid out exactly like [`NetworkModel::params`].
pub type Gradients<T = f32> = Vec<Params<T>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Layer chain plus parameters. Shapes are validated on construction, so
/// every method may assume a consistent chain.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel<T = f32> {
    input_shape: [usize; 3],
    layers: Vec<LayerSpec>,
    params: Vec<Params<T>>,
    class_names: Vec<String>,
}

pub const DEFAULT_INPUT: [usize; 3] = [128, 128, 3];

/// Builds the food-recognition network for 128×128 RGB input and ten classes.
pub fn build_paper_network(seed: u64) -> NetworkModel {
    let names = (0..10).map(|i| format!("class{i}")).collect();
    NetworkModel::five_layer(DEFAULT_INPUT, names, seed).expect("five-layer chain is consistent")
}

impl<T: Real> NetworkModel<T> {
    /// The five-layer chain at an arbitrary input size (e.g. 64×64 for desk-scale runs).
    pub fn five_layer(input_shape: [usize; 3], class_names: Vec<String>, seed: u64) -> Result<Self> {
        let layers = five_layer_specs(class_names.len());
        Self::new(input_shape, layers, class_names, seed)
    }

    /// Validates the chain and draws initial weights: He-normal
    /// (`sqrt(2/fan_in)`) for every layer except the dense layer feeding
    /// softmax, which gets `sqrt(1/fan_in)`. Biases start at zero.
    pub fn new(
        input_shape: [usize; 3],
        layers: Vec<LayerSpec>,
        class_names: Vec<String>,
        seed: u64,
    ) -> Result<Self> {
        let shapes = chain_shapes(&input_shape, &layers, class_names.len())?;
        let mut rng = Rng::new(seed);
        let mut params = Vec::new();
        for (i, layer) in layers.iter().enumerate() {
            let (wshape, fan_in) = match param_shape(layer, &shapes[i]) {
                Some(v) => v,
                None => continue,
            };
            let feeds_softmax = layers[i + 1..]
                .iter()
                .find(|l| !matches!(l, LayerSpec::Dropout { .. }))
                .is_some_and(|l| *l == LayerSpec::Softmax);
            let gain = if feeds_softmax { 1.0 } else { 2.0 };
            let std = (gain / fan_in as f64).sqrt();
            let weight = Tensor::from_fn(&wshape, |_| T::of(rng.normal() * std));
            let bias = Tensor::zeros(&[*wshape.last().unwrap()]);
            params.push(Params { weight, bias });
        }
        Ok(Self {
            input_shape,
            layers,
            params,
            class_names,
        })
    }

    /// Assembles a model from already-populated parameters (checkpoint load).
    pub fn from_parts(
        input_shape: [usize; 3],
        layers: Vec<LayerSpec>,
        params: Vec<Params<T>>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let shapes = chain_shapes(&input_shape, &layers, class_names.len())?;
        let expected: Vec<_> = layers
            .iter()
            .zip(&shapes)
            .filter_map(|(l, s)| param_shape(l, s))
            .collect();
        if expected.len() != params.len() {
            return Err(Error::invalid(format!(
                "layer chain has {} parameterized layers but {} parameter sets were given",
                expected.len(),
                params.len()
            )));
        }
        for ((wshape, _), p) in expected.iter().zip(&params) {
            if p.weight.shape() != wshape.as_slice() || p.bias.shape() != [*wshape.last().unwrap()] {
                return Err(Error::ShapeMismatch {
                    op: "NetworkModel::from_parts",
                    expected: wshape.clone(),
                    got: p.weight.shape().to_vec(),
                });
            }
        }
        Ok(Self {
            input_shape,
            layers,
            params,
            class_names,
        })
    }

    pub fn input_shape(&self) -> [usize; 3] {
        self.input_shape
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn params(&self) -> &[Params<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Params<T>] {
        &mut self.params
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(Params::len).sum()
    }

    /// Same architecture with every dropout rate replaced.
    pub fn with_dropout_rate(&self, rate: f32) -> Self {
        let mut out = self.clone();
        for l in &mut out.layers {
            if let LayerSpec::Dropout { rate: r } = l {
                *r = rate;
            }
        }
        out
    }

    pub fn cast<U: Real>(&self) -> NetworkModel<U> {
        NetworkModel {
            input_shape: self.input_shape,
            layers: self.layers.clone(),
            params: self.params.iter().map(Params::cast).collect(),
            class_names: self.class_names.clone(),
        }
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        if x.shape() != self.input_shape {
            return Err(Error::ShapeMismatch {
                op: "forward",
                expected: self.input_shape.to_vec(),
                got: x.shape().to_vec(),
            });
        }
        Ok(())
    }

    /// Forward pass of one image. With `dropout` set, inverted-dropout masks
    /// are drawn from it in layer order; otherwise dropout is the identity.
    /// The cache is only populated when `keep_cache` is set.
    pub fn forward_sample(
        &self,
        x: &Tensor<T>,
        mut dropout: Option<&mut Rng>,
        keep_cache: bool,
    ) -> Result<(Vec<T>, SampleCache<T>)> {
        self.check_input(x)?;
        let mut act = x.clone();
        let mut cache = Vec::with_capacity(if keep_cache { self.layers.len() } else { 0 });
        let mut pi = 0;
        let mut probs = None;
        for layer in &self.layers {
            let (next, entry) = match *layer {
                LayerSpec::Conv { .. } => {
                    let p = &self.params[pi];
                    pi += 1;
                    let out = conv2d_forward(&act, &p.weight, &p.bias)?;
                    (out, LayerCache::Conv(act))
                }
                LayerSpec::MaxPool => {
                    let (out, argmax) = maxpool2d_forward(&act)?;
                    let shape = act.shape().to_vec();
                    (out, LayerCache::Pool { argmax, shape })
                }
                LayerSpec::Relu => {
                    let out = act.map(|v| if v > T::zero() { v } else { T::zero() });
                    let entry = LayerCache::Relu(if keep_cache { out.clone() } else { Tensor::zeros(&[0]) });
                    (out, entry)
                }
                LayerSpec::Dropout { rate } => match dropout.as_deref_mut() {
                    Some(rng) if rate > 0.0 => {
                        let keep = 1.0 - rate as f64;
                        let scale = T::of(1.0 / keep);
                        let mask: Vec<T> = (0..act.len())
                            .map(|_| if rng.uniform() < keep { scale } else { T::zero() })
                            .collect();
                        let mut out = act;
                        for (v, &m) in out.data_mut().iter_mut().zip(&mask) {
                            *v *= m;
                        }
                        (out, LayerCache::Dropout(Some(mask)))
                    }
                    _ => (act, LayerCache::Dropout(None)),
                },
                LayerSpec::Flatten => {
                    let shape = act.shape().to_vec();
                    let n = act.len();
                    (act.reshape(&[n])?, LayerCache::Flatten(shape))
                }
                LayerSpec::Dense { .. } => {
                    let p = &self.params[pi];
                    pi += 1;
                    let out = dense_forward(&act, &p.weight, &p.bias);
                    (out, LayerCache::Dense(act))
                }
                LayerSpec::Softmax => {
                    let out = Tensor::from_vec(act.shape(), softmax(act.data()))?;
                    probs = Some(out.data().to_vec());
                    (out, LayerCache::Softmax)
                }
            };
            if keep_cache {
                cache.push(entry);
            }
            act = next;
        }
        let probs = probs.unwrap_or_else(|| act.into_data());
        Ok((probs, SampleCache { layers: cache }))
    }

    /// Backward pass for one sample, given the gradient of the loss with
    /// respect to the softmax input (the logits).
    pub fn backward_sample(&self, cache: &SampleCache<T>, grad_logits: &[T]) -> Result<Gradients<T>> {
        if cache.layers.len() != self.layers.len() {
            return Err(Error::invalid("cache does not belong to this model (was it produced with keep_cache?)"));
        }
        let mut grads: Vec<Option<Params<T>>> = vec![None; self.params.len()];
        let mut pi = self.params.len();
        let mut grad = Tensor::from_vec(&[grad_logits.len()], grad_logits.to_vec())?;
        let first_param_layer = self.layers.iter().position(LayerSpec::has_params);
        for (li, (layer, entry)) in self.layers.iter().zip(&cache.layers).enumerate().rev() {
            // nothing upstream consumes the gradient below the first parameterized layer
            let want_input = first_param_layer.is_some_and(|f| li > f);
            grad = match (layer, entry) {
                (LayerSpec::Softmax, LayerCache::Softmax) => grad,
                (LayerSpec::Conv { .. }, LayerCache::Conv(input)) => {
                    pi -= 1;
                    let p = &self.params[pi];
                    let g = conv2d_backward_opt(&grad, input, &p.weight, want_input)?;
                    grads[pi] = Some(Params {
                        weight: g.kernels,
                        bias: g.bias,
                    });
                    match g.input {
                        Some(gi) => gi,
                        None => break,
                    }
                }
                (LayerSpec::Dense { .. }, LayerCache::Dense(input)) => {
                    pi -= 1;
                    let p = &self.params[pi];
                    let (gi, gw, gb) = dense_backward(&grad, input, &p.weight, want_input);
                    grads[pi] = Some(Params { weight: gw, bias: gb });
                    match gi {
                        Some(gi) => gi,
                        None => break,
                    }
                }
                (LayerSpec::MaxPool, LayerCache::Pool { argmax, shape }) => {
                    maxpool2d_backward(&grad, argmax, shape)?
                }
                (LayerSpec::Relu, LayerCache::Relu(out)) => {
                    let mut g = grad;
                    for (gv, &o) in g.data_mut().iter_mut().zip(out.data()) {
                        if o <= T::zero() {
                            *gv = T::zero();
                        }
                    }
                    g
                }
                (LayerSpec::Dropout { .. }, LayerCache::Dropout(mask)) => {
                    let mut g = grad;
                    if let Some(mask) = mask {
                        for (gv, &m) in g.data_mut().iter_mut().zip(mask) {
                            *gv *= m;
                        }
                    }
                    g
                }
                (LayerSpec::Flatten, LayerCache::Flatten(shape)) => grad.reshape(shape)?,
                _ => return Err(Error::invalid("cache entry does not match layer kind")),
            };
        }
        Ok(grads
            .into_iter()
            .zip(&self.params)
            .map(|(g, p)| g.unwrap_or_else(|| p.zeros_like()))
            .collect())
    }

    /// Batched forward pass over a `(B, H, W, C)` tensor. In train mode one
    /// seed per sample is drawn from `rng` in sample order, so the masks do
    /// not depend on how samples are scheduled across threads. Eval mode
    /// leaves `rng` untouched.
    pub fn forward(&self, batch: &Tensor<T>, mode: Mode, rng: Rng) -> Result<(Tensor<T>, BatchCache<T>, Rng)> {
        let [h, w, c] = self.input_shape;
        if batch.rank() != 4 || batch.shape()[1..] != [h, w, c] {
            return Err(Error::ShapeMismatch {
                op: "forward",
                expected: vec![batch.shape().first().copied().unwrap_or(0), h, w, c],
                got: batch.shape().to_vec(),
            });
        }
        let b = batch.shape()[0];
        let per = h * w * c;
        let mut rng = rng;
        let seeds: Vec<Option<u64>> = (0..b)
            .map(|_| (mode == Mode::Train).then(|| rng.next_u64()))
            .collect();
        let results: Vec<_> = seeds
            .par_iter()
            .enumerate()
            .map(|(i, seed)| {
                let x = Tensor::from_vec(&[h, w, c], batch.data()[i * per..(i + 1) * per].to_vec())?;
                let mut sample_rng = seed.map(Rng::new);
                self.forward_sample(&x, sample_rng.as_mut(), mode == Mode::Train)
            })
            .collect::<Result<_>>()?;
        let k = self.num_classes();
        let mut probs = Tensor::zeros(&[b, k]);
        let mut samples = Vec::with_capacity(b);
        for (i, (p, cache)) in results.into_iter().enumerate() {
            probs.data_mut()[i * k..(i + 1) * k].copy_from_slice(&p);
            samples.push(cache);
        }
        Ok((probs.clone(), BatchCache { samples, probs }, rng))
    }

    /// Gradient of the mean cross-entropy over the cached batch.
    pub fn backward(&self, cache: &BatchCache<T>, labels: &[usize]) -> Result<Gradients<T>> {
        let b = cache.samples.len();
        if labels.len() != b {
            return Err(Error::invalid(format!(
                "cache holds {b} samples but {} labels were given",
                labels.len()
            )));
        }
        let k = self.num_classes();
        let inv_b = T::of(1.0 / b as f64);
        let per_sample: Vec<Gradients<T>> = cache
            .samples
            .par_iter()
            .zip(labels)
            .enumerate()
            .map(|(i, (sc, &label))| {
                let probs = &cache.probs.data()[i * k..(i + 1) * k];
                let g = fused_softmax_ce_grad(probs, label, inv_b)?;
                self.backward_sample(sc, &g)
            })
            .collect::<Result<_>>()?;
        let mut total = self.zero_grads();
        for g in &per_sample {
            accumulate(&mut total, g)?;
        }
        Ok(total)
    }

    pub fn zero_grads(&self) -> Gradients<T> {
        self.params.iter().map(Params::zeros_like).collect()
    }

    /// Forward and backward for a list of images in train mode, returning the
    /// mean-loss gradient plus the summed loss and number of correct
    /// predictions. Per-sample gradients are accumulated in sample order, so
    /// the result is identical for any thread count.
    pub fn batch_gradients(
        &self,
        images: &[&Tensor<T>],
        labels: &[usize],
        rng: &mut Rng,
    ) -> Result<(Gradients<T>, f64, usize)> {
        if images.len() != labels.len() || images.is_empty() {
            return Err(Error::invalid("batch_gradients needs equally many (≥ 1) images and labels"));
        }
        let k = self.num_classes();
        let inv_b = T::of(1.0 / images.len() as f64);
        let seeds: Vec<u64> = images.iter().map(|_| rng.next_u64()).collect();
        let chunk = rayon::current_num_threads().max(1);
        let mut total = self.zero_grads();
        let mut loss = 0.0;
        let mut correct = 0;
        let jobs: Vec<_> = (0..images.len()).collect();
        for idx in jobs.chunks(chunk) {
            let results: Vec<_> = idx
                .par_iter()
                .map(|&i| {
                    let label = labels[i];
                    if label >= k {
                        return Err(Error::LabelOutOfRange { label, classes: k });
                    }
                    let mut r = Rng::new(seeds[i]);
                    let (probs, cache) = self.forward_sample(images[i], Some(&mut r), true)?;
                    let g = fused_softmax_ce_grad(&probs, label, inv_b)?;
                    let grads = self.backward_sample(&cache, &g)?;
                    let l = cross_entropy_single(&probs, label);
                    Ok((grads, l, argmax(&probs) == label))
                })
                .collect::<Result<_>>()?;
            for (g, l, ok) in results {
                accumulate(&mut total, &g)?;
                loss += l;
                correct += ok as usize;
            }
        }
        Ok((total, loss, correct))
    }

    /// Eval-mode class probabilities for each image.
    pub fn predict_probs(&self, images: &[&Tensor<T>]) -> Result<Vec<Vec<T>>> {
        images
            .par_iter()
            .map(|x| self.forward_sample(x, None, false).map(|(p, _)| p))
            .collect()
    }

    /// Eval-mode argmax class per image; ties go to the smallest index.
    pub fn predict(&self, images: &[&Tensor<T>]) -> Result<Vec<usize>> {
        Ok(self.predict_probs(images)?.iter().map(|p| argmax(p)).collect())
    }

    /// Batched variant of [`Self::predict`] over a `(B, H, W, C)` tensor.
    pub fn predict_batch(&self, batch: &Tensor<T>) -> Result<Vec<usize>> {
        let (probs, _, _) = self.forward(batch, Mode::Eval, Rng::new(0))?;
        let k = self.num_classes();
        Ok(probs.data().chunks_exact(k).map(argmax).collect())
    }
}

/// Stacks equally shaped images into one `(B, ...)` tensor.
pub fn stack<T: Real>(images: &[&Tensor<T>]) -> Result<Tensor<T>> {
    let first = images.first().ok_or(Error::Empty("image batch"))?;
    let mut shape = vec![images.len()];
    shape.extend_from_slice(first.shape());
    let mut data = Vec::with_capacity(first.len() * images.len());
    for img in images {
        first.check_same_shape("stack", img)?;
        data.extend_from_slice(img.data());
    }
    Tensor::from_vec(&shape, data)
}

pub fn argmax<T: Real>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// `(probs − onehot(label)) · scale`: gradient of cross-entropy with
/// respect to the logits when the network ends in softmax.
pub fn fused_softmax_ce_grad<T: Real>(probs: &[T], label: usize, scale: T) -> Result<Vec<T>> {
    if label >= probs.len() {
        return Err(Error::LabelOutOfRange {
            label,
            classes: probs.len(),
        });
    }
    Ok(probs
        .iter()
        .enumerate()
        .map(|(j, &p)| (if j == label { p - T::one() } else { p }) * scale)
        .collect())
}

pub(crate) fn accumulate<T: Real>(total: &mut Gradients<T>, g: &Gradients<T>) -> Result<()> {
    for (t, s) in total.iter_mut().zip(g) {
        t.weight.add_assign(&s.weight)?;
        t.bias.add_assign(&s.bias)?;
    }
    Ok(())
}

fn dense_forward<T: Real>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    let out_n = w.shape()[1];
    let mut out = b.data().to_vec();
    for (i, &xi) in x.data().iter().enumerate() {
        if xi == T::zero() {
            continue;
        }
        for (o, &wv) in out.iter_mut().zip(&w.data()[i * out_n..(i + 1) * out_n]) {
            *o += xi * wv;
        }
    }
    Tensor::from_vec(&[out_n], out).expect("dense output length")
}

fn dense_backward<T: Real>(
    grad: &Tensor<T>,
    x: &Tensor<T>,
    w: &Tensor<T>,
    want_input: bool,
) -> (Option<Tensor<T>>, Tensor<T>, Tensor<T>) {
    let out_n = w.shape()[1];
    let g = grad.data();
    let mut gw = Tensor::zeros(w.shape());
    for (i, &xi) in x.data().iter().enumerate() {
        if xi == T::zero() {
            continue;
        }
        for (gwv, &gv) in gw.data_mut()[i * out_n..(i + 1) * out_n].iter_mut().zip(g) {
            *gwv += xi * gv;
        }
    }
    let gi = want_input.then(|| {
        Tensor::from_fn(x.shape(), |i| {
            w.data()[i * out_n..(i + 1) * out_n]
                .iter()
                .zip(g)
                .map(|(&wv, &gv)| wv * gv)
                .sum()
        })
    });
    (gi, gw, grad.clone())
}

/// Per-layer intermediate values the backward pass needs.
#[derive(Debug, Clone)]
pub(crate) enum LayerCache<T> {
    Conv(Tensor<T>),
    Pool { argmax: Vec<usize>, shape: Vec<usize> },
    Relu(Tensor<T>),
    Dropout(Option<Vec<T>>),
    Flatten(Vec<usize>),
    Dense(Tensor<T>),
    Softmax,
}

#[derive(Debug, Clone)]
pub struct SampleCache<T> {
    pub(crate) layers: Vec<LayerCache<T>>,
}

#[derive(Debug, Clone)]
pub struct BatchCache<T> {
    samples: Vec<SampleCache<T>>,
    probs: Tensor<T>,
}

impl<T> BatchCache<T> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Activation shapes after each layer, starting with the input.
pub fn layer_shapes(input: &[usize; 3], layers: &[LayerSpec]) -> Result<Vec<Vec<usize>>> {
    if input.contains(&0) {
        return Err(Error::invalid(format!("input shape {input:?} has a zero extent")));
    }
    let mut shapes = vec![input.to_vec()];
    for (i, layer) in layers.iter().enumerate() {
        layer.validate()?;
        if *layer == LayerSpec::Softmax && i + 1 != layers.len() {
            return Err(Error::invalid("softmax must be the final layer"));
        }
        let next = layer.output_shape(shapes.last().unwrap())?;
        shapes.push(next);
    }
    if layers.last() != Some(&LayerSpec::Softmax) {
        return Err(Error::invalid("layer chain must end with softmax"));
    }
    Ok(shapes)
}

/// [`layer_shapes`], additionally requiring one output per class.
pub fn chain_shapes(input: &[usize; 3], layers: &[LayerSpec], classes: usize) -> Result<Vec<Vec<usize>>> {
    let shapes = layer_shapes(input, layers)?;
    let out = shapes.last().unwrap();
    if out.as_slice() != [classes] {
        return Err(Error::invalid(format!(
            "network produces {out:?} outputs but {classes} class names were given"
        )));
    }
    Ok(shapes)
}

fn param_shape(layer: &LayerSpec, input: &[usize]) -> Option<(Vec<usize>, usize)> {
    match *layer {
        LayerSpec::Conv { kernel, filters } => {
            let cin = input[2];
            Some((vec![kernel, kernel, cin, filters], kernel * kernel * cin))
        }
        LayerSpec::Dense { units } => Some((vec![input[0], units], input[0])),
        _ => None,
    }
}
