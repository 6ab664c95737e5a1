use crate::error::{NaraError, Result};
use crate::tensor::{Parameters, Tensor};
use rand::Rng;

/// Fully-connected layer `y = W·x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl DenseLayer {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: Tensor::zeros(&[output, input]),
            bias: Tensor::zeros(&[output]),
        }
    }

    /// Uniform `±1/√in` initialisation (the usual default for linear layers).
    pub fn init<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (input as f64).sqrt();
        Self {
            weight: Tensor::uniform(&[output, input], bound, rng),
            bias: Tensor::uniform(&[output], bound, rng),
        }
    }

    pub fn input_size(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_size(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_size() {
            return Err(NaraError::shape(self.input_size(), x.len()));
        }
        let mut y = self.bias.data().to_vec();
        let c = self.input_size();
        for (o, row) in y.iter_mut().zip(self.weight.data().chunks_exact(c)) {
            *o += crate::tensor::dot(row, x);
        }
        Ok(y)
    }

    /// Accumulates parameter gradients for input `x` and upstream `dy`;
    /// returns `dL/dx`.
    pub fn backward(&self, x: &[f64], dy: &[f64], grads: &mut DenseLayer) -> Vec<f64> {
        grads.weight.add_outer(dy, x);
        grads.bias.add_slice(dy);
        let mut dx = vec![0.0; x.len()];
        self.weight.matvec_t_acc(dy, &mut dx);
        dx
    }
}

impl Parameters for DenseLayer {
    fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        vec![("weight".into(), &self.weight), ("bias".into(), &self.bias)]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Records the inputs of successive forward calls so the matching backward
/// calls can be replayed in reverse order.
#[derive(Debug)]
pub struct DenseTape<'a> {
    layer: &'a DenseLayer,
    inputs: Vec<Vec<f64>>,
}

impl<'a> DenseTape<'a> {
    pub fn new(layer: &'a DenseLayer) -> Self {
        Self {
            layer,
            inputs: Vec::new(),
        }
    }

    pub fn forward(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        let y = self.layer.forward(x)?;
        self.inputs.push(x.to_vec());
        Ok(y)
    }

    /// Pops the most recent forward record.
    pub fn backward(&mut self, dy: &[f64], grads: &mut DenseLayer) -> Result<Vec<f64>> {
        let x = self.inputs.pop().ok_or(NaraError::NoForward)?;
        if dy.len() != self.layer.output_size() {
            return Err(NaraError::shape(self.layer.output_size(), dy.len()));
        }
        Ok(self.layer.backward(&x, dy, grads))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{finite_difference_gradient, max_relative_error};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn squared_loss_gradient_is_outer_product() {
        let mut layer = DenseLayer::zeros(3, 1);
        layer.weight.data_mut().copy_from_slice(&[0.5, -1.0, 2.0]);
        layer.bias.data_mut()[0] = 0.1;
        let x = [1.0, 2.0, 3.0];
        let target = 1.0;
        let y = layer.forward(&x).unwrap()[0];
        let err = y - target;
        let mut g = layer.zeros_like();
        layer.backward(&x, &[2.0 * err], &mut g);
        for (gw, xi) in g.weight.data().iter().zip(&x) {
            assert!((gw - 2.0 * err * xi).abs() < 1e-12);
        }
        assert!((g.bias.data()[0] - 2.0 * err).abs() < 1e-12);
    }

    #[test]
    fn zero_loss_gives_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let layer = DenseLayer::init(4, 2, &mut rng);
        let mut g = layer.zeros_like();
        layer.backward(&[1.0, 2.0, 3.0, 4.0], &[0.0, 0.0], &mut g);
        assert!(g.flatten().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_before_forward_errors() {
        let layer = DenseLayer::zeros(2, 2);
        let mut tape = DenseTape::new(&layer);
        let mut g = layer.zeros_like();
        assert_eq!(tape.backward(&[1.0, 1.0], &mut g), Err(NaraError::NoForward));
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let layer = DenseLayer::zeros(2, 2);
        assert!(matches!(layer.forward(&[1.0]), Err(NaraError::ShapeMismatch { .. })));
    }

    #[test]
    fn two_layer_tanh_net_matches_finite_difference() {
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let l1 = DenseLayer::init(3, 4, &mut rng);
            let l2 = DenseLayer::init(4, 2, &mut rng);
            let x = [0.3, -0.7, 1.1];
            let loss = |a: &DenseLayer, b: &DenseLayer| -> f64 {
                let h: Vec<f64> = a.forward(&x).unwrap().iter().map(|v| v.tanh()).collect();
                b.forward(&h).unwrap().iter().map(|v| v * v).sum()
            };
            let h_pre = l1.forward(&x).unwrap();
            let h: Vec<f64> = h_pre.iter().map(|v| v.tanh()).collect();
            let y = l2.forward(&h).unwrap();
            let dy: Vec<f64> = y.iter().map(|v| 2.0 * v).collect();
            let (mut g1, mut g2) = (l1.zeros_like(), l2.zeros_like());
            let dh = l2.backward(&h, &dy, &mut g2);
            let dpre: Vec<f64> = dh.iter().zip(&h).map(|(d, t)| d * (1.0 - t * t)).collect();
            l1.backward(&x, &dpre, &mut g1);

            let mut analytic = g1.flatten();
            analytic.extend(g2.flatten());
            let n1 = l1.num_params();
            let mut flat = l1.flatten();
            flat.extend(l2.flatten());
            let numeric = finite_difference_gradient(
                |p| {
                    let (mut a, mut b) = (l1.clone(), l2.clone());
                    a.assign_flat(&p[..n1]);
                    b.assign_flat(&p[n1..]);
                    Ok(loss(&a, &b))
                },
                &flat,
                1e-5,
            )
            .unwrap();
            assert!(max_relative_error(&analytic, &numeric, 1e-4) < 1e-4, "seed {seed}");
        }
    }
}
