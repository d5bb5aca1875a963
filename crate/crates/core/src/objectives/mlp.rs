use rand::Rng;

use super::Objective;
use crate::kernel::Smoothness;
use crate::samplers::RngStream;

const LAYERS: [usize; 5] = [8, 16, 32, 16, 1];

/// Fixed random tanh network `8 → 16 → 32 → 16 → 1`, zero biases.
#[derive(Debug, Clone)]
pub struct Mlp {
    /// `weights[k]` is `out × in`, row-major.
    pub weights: Vec<Vec<f64>>,
}

impl Mlp {
    /// Xavier-uniform weights, bound √(6 / (fan_in + fan_out)).
    pub fn xavier(seed: u64) -> Self {
        let mut rng = RngStream::at(seed, vec![0x4d4c50]);
        let weights = LAYERS
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                (0..fan_in * fan_out).map(|_| rng.random_range(-bound..=bound)).collect()
            })
            .collect();
        Mlp { weights }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut act = x.to_vec();
        let last = self.weights.len() - 1;
        for (k, w) in self.weights.iter().enumerate() {
            let n_in = LAYERS[k];
            let mut next: Vec<f64> =
                w.chunks(n_in).map(|row| row.iter().zip(&act).map(|(a, b)| a * b).sum()).collect();
            if k < last {
                next.iter_mut().for_each(|v| *v = v.tanh());
            }
            act = next;
        }
        act[0]
    }

    /// Σ |w| over the output layer; bounds |f| since hidden activations lie in [-1, 1].
    pub fn output_bound(&self) -> f64 {
        self.weights.last().expect("four layers").iter().map(|w| w.abs()).sum()
    }
}

/// 8-dimensional network objective with ν = 1/2.
pub fn make_mlp(seed: u64) -> Objective {
    let net = Mlp::xavier(seed);
    Objective::new("mlp", LAYERS[0], Smoothness::Half, move |x| net.eval(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probes(n: usize) -> Vec<Vec<f64>> {
        let mut rng = RngStream::new(99);
        (0..n).map(|_| (0..8).map(|_| rng.random::<f64>()).collect()).collect()
    }

    #[test]
    fn shapes_and_bounds() {
        let net = Mlp::xavier(1);
        let sizes: Vec<usize> = net.weights.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![128, 512, 512, 16]);
        let b1 = (6.0f64 / 24.0).sqrt();
        assert!(net.weights[0].iter().all(|w| w.abs() <= b1));
        let bound = net.output_bound();
        for p in probes(100) {
            assert!(net.eval(&p).abs() <= bound);
        }
    }

    #[test]
    fn seeds_are_reproducible_and_distinct() {
        let (a, b, c) = (make_mlp(3), make_mlp(3), make_mlp(4));
        let mut differs = false;
        for p in probes(100) {
            assert_eq!(a.eval(&p).unwrap().to_bits(), b.eval(&p).unwrap().to_bits());
            differs |= a.eval(&p).unwrap() != c.eval(&p).unwrap();
        }
        assert!(differs);
        assert_eq!(a.nu_default(), Smoothness::Half);
    }
}
