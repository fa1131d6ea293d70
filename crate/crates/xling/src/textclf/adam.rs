//! Plain Adam with bias correction, operating on flat tensor slices in a
//! fixed order.

pub struct Adam {
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(beta1: f64, beta2: f64, epsilon: f64, tensor_sizes: &[usize]) -> Adam {
        Adam {
            beta1,
            beta2,
            epsilon,
            step: 0,
            m: tensor_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: tensor_sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// One update over all tensors at the given (possibly scheduled)
    /// learning rate.
    pub fn step(&mut self, params: Vec<&mut [f64]>, grads: Vec<&[f64]>, learning_rate: f64) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.step += 1;
        let t = self.step as f64;
        let bc1 = 1.0 - self.beta1.powf(t);
        let bc2 = 1.0 - self.beta2.powf(t);
        for ((tensor, grad), (m, v)) in params
            .into_iter()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for i in 0..tensor.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * grad[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                tensor[i] -= learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
    }
}
