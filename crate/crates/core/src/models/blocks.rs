use ndarray::Array3;

use crate::nn::{relu, relu_backward, BatchNorm1d, Conv1d, Param, Parameters};

/// Pre-activation wide residual block: BN-ReLU-conv-BN-ReLU-conv. When the
/// width or stride changes, a 1x1 strided projection of the first
/// activation forms the shortcut.
#[derive(Debug, Clone)]
pub struct PreActBlock {
    bn1: BatchNorm1d,
    conv1: Conv1d,
    bn2: BatchNorm1d,
    conv2: Conv1d,
    shortcut: Option<Conv1d>,
    cache: Option<(Array3<f64>, Array3<f64>)>,
}

impl PreActBlock {
    pub fn new(in_ch: usize, out_ch: usize, stride: usize, kernel: usize) -> Self {
        let pad = kernel / 2;
        let shortcut = (in_ch != out_ch || stride != 1).then(|| Conv1d::new(in_ch, out_ch, 1, stride, 0));
        Self {
            bn1: BatchNorm1d::new(in_ch),
            conv1: Conv1d::new(in_ch, out_ch, kernel, stride, pad),
            bn2: BatchNorm1d::new(out_ch),
            conv2: Conv1d::new(out_ch, out_ch, kernel, 1, pad),
            shortcut,
            cache: None,
        }
    }

    pub fn convs_mut(&mut self) -> impl Iterator<Item = &mut Conv1d> {
        [&mut self.conv1, &mut self.conv2]
            .into_iter()
            .chain(self.shortcut.as_mut())
    }

    pub fn infer(&self, x: &Array3<f64>) -> Array3<f64> {
        let r1 = relu(&self.bn1.infer(x));
        let h = self.conv1.infer(&r1);
        let o = self.conv2.infer(&relu(&self.bn2.infer(&h)));
        match &self.shortcut {
            Some(sc) => o + sc.infer(&r1),
            None => o + x,
        }
    }

    pub fn forward(&mut self, x: &Array3<f64>) -> Array3<f64> {
        let a1 = self.bn1.forward(x);
        let r1 = relu(&a1);
        let h = self.conv1.forward(&r1);
        let a2 = self.bn2.forward(&h);
        let o = self.conv2.forward(&relu(&a2));
        let out = match &mut self.shortcut {
            Some(sc) => o + sc.forward(&r1),
            None => o + x,
        };
        self.cache = Some((a1, a2));
        out
    }

    pub fn backward(&mut self, dy: &Array3<f64>) -> Array3<f64> {
        let (a1, a2) = self.cache.take().expect("block backward without forward");
        let dr2 = self.conv2.backward(dy);
        let dh = self.bn2.backward(&relu_backward(&a2, &dr2));
        let mut dr1 = self.conv1.backward(&dh);
        match &mut self.shortcut {
            Some(sc) => {
                dr1 += &sc.backward(dy);
                self.bn1.backward(&relu_backward(&a1, &dr1))
            }
            None => self.bn1.backward(&relu_backward(&a1, &dr1)) + dy,
        }
    }
}

impl Parameters for PreActBlock {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param)) {
        self.bn1.visit_params(f);
        self.conv1.visit_params(f);
        self.bn2.visit_params(f);
        self.conv2.visit_params(f);
        if let Some(sc) = &self.shortcut {
            sc.visit_params(f);
        }
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param)) {
        self.bn1.visit_params_mut(f);
        self.conv1.visit_params_mut(f);
        self.bn2.visit_params_mut(f);
        self.conv2.visit_params_mut(f);
        if let Some(sc) = &mut self.shortcut {
            sc.visit_params_mut(f);
        }
    }

    fn visit_buffers<'a>(&'a self, f: &mut dyn FnMut(&'a [f64])) {
        self.bn1.visit_buffers(f);
        self.bn2.visit_buffers(f);
    }

    fn visit_buffers_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.bn1.visit_buffers_mut(f);
        self.bn2.visit_buffers_mut(f);
    }
}

/// Post-activation ResNet basic block: conv-BN-ReLU-conv-BN, add shortcut,
/// ReLU. Projection shortcut is a 1x1 strided conv followed by BN.
#[derive(Debug, Clone)]
pub struct BasicBlock {
    conv1: Conv1d,
    bn1: BatchNorm1d,
    conv2: Conv1d,
    bn2: BatchNorm1d,
    shortcut: Option<(Conv1d, BatchNorm1d)>,
    cache: Option<(Array3<f64>, Array3<f64>)>,
}

impl BasicBlock {
    pub fn new(in_ch: usize, out_ch: usize, stride: usize, kernel: usize) -> Self {
        let pad = kernel / 2;
        let shortcut = (in_ch != out_ch || stride != 1)
            .then(|| (Conv1d::new(in_ch, out_ch, 1, stride, 0), BatchNorm1d::new(out_ch)));
        Self {
            conv1: Conv1d::new(in_ch, out_ch, kernel, stride, pad),
            bn1: BatchNorm1d::new(out_ch),
            conv2: Conv1d::new(out_ch, out_ch, kernel, 1, pad),
            bn2: BatchNorm1d::new(out_ch),
            shortcut,
            cache: None,
        }
    }

    pub fn convs_mut(&mut self) -> impl Iterator<Item = &mut Conv1d> {
        [&mut self.conv1, &mut self.conv2]
            .into_iter()
            .chain(self.shortcut.as_mut().map(|(c, _)| c))
    }

    pub fn infer(&self, x: &Array3<f64>) -> Array3<f64> {
        let r1 = relu(&self.bn1.infer(&self.conv1.infer(x)));
        let a2 = self.bn2.infer(&self.conv2.infer(&r1));
        let s = match &self.shortcut {
            Some((c, b)) => a2 + b.infer(&c.infer(x)),
            None => a2 + x,
        };
        relu(&s)
    }

    pub fn forward(&mut self, x: &Array3<f64>) -> Array3<f64> {
        let h1 = self.conv1.forward(x);
        let a1 = self.bn1.forward(&h1);
        let h2 = self.conv2.forward(&relu(&a1));
        let a2 = self.bn2.forward(&h2);
        let s = match &mut self.shortcut {
            Some((c, b)) => {
                let p = c.forward(x);
                a2 + b.forward(&p)
            }
            None => a2 + x,
        };
        let out = relu(&s);
        self.cache = Some((a1, s));
        out
    }

    pub fn backward(&mut self, dy: &Array3<f64>) -> Array3<f64> {
        let (a1, s) = self.cache.take().expect("block backward without forward");
        let ds = relu_backward(&s, dy);
        let dr1 = self.conv2.backward(&self.bn2.backward(&ds));
        let dx = self.conv1.backward(&self.bn1.backward(&relu_backward(&a1, &dr1)));
        match &mut self.shortcut {
            Some((c, b)) => dx + c.backward(&b.backward(&ds)),
            None => dx + ds,
        }
    }
}

impl Parameters for BasicBlock {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Param)) {
        self.conv1.visit_params(f);
        self.bn1.visit_params(f);
        self.conv2.visit_params(f);
        self.bn2.visit_params(f);
        if let Some((c, b)) = &self.shortcut {
            c.visit_params(f);
            b.visit_params(f);
        }
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Param)) {
        self.conv1.visit_params_mut(f);
        self.bn1.visit_params_mut(f);
        self.conv2.visit_params_mut(f);
        self.bn2.visit_params_mut(f);
        if let Some((c, b)) = &mut self.shortcut {
            c.visit_params_mut(f);
            b.visit_params_mut(f);
        }
    }

    fn visit_buffers<'a>(&'a self, f: &mut dyn FnMut(&'a [f64])) {
        self.bn1.visit_buffers(f);
        self.bn2.visit_buffers(f);
        if let Some((_, b)) = &self.shortcut {
            b.visit_buffers(f);
        }
    }

    fn visit_buffers_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.bn1.visit_buffers_mut(f);
        self.bn2.visit_buffers_mut(f);
        if let Some((_, b)) = &mut self.shortcut {
            b.visit_buffers_mut(f);
        }
    }
}
