/// Per-point gradients, shaped like the fields of a [`GaussianCloud`](crate::scene::GaussianCloud).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RenderGrads {
    pub positions: Vec<[f64; 3]>,
    pub rotations: Vec<[f64; 4]>,
    pub log_scales: Vec<[f64; 3]>,
    pub colors: Vec<[f64; 3]>,
    pub opacity_logits: Vec<f64>,
}

impl RenderGrads {
    pub fn zeros(n: usize) -> Self {
        Self {
            positions: vec![[0.0; 3]; n],
            rotations: vec![[0.0; 4]; n],
            log_scales: vec![[0.0; 3]; n],
            colors: vec![[0.0; 3]; n],
            opacity_logits: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    fn values(&self) -> impl Iterator<Item = &f64> {
        self.positions
            .iter()
            .flatten()
            .chain(self.rotations.iter().flatten())
            .chain(self.log_scales.iter().flatten())
            .chain(self.colors.iter().flatten())
            .chain(self.opacity_logits.iter())
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.positions
            .iter_mut()
            .flatten()
            .chain(self.rotations.iter_mut().flatten())
            .chain(self.log_scales.iter_mut().flatten())
            .chain(self.colors.iter_mut().flatten())
            .chain(self.opacity_logits.iter_mut())
    }

    /// `self += other`, element-wise.
    pub fn accumulate(&mut self, other: &RenderGrads) {
        assert_eq!(self.len(), other.len(), "gradient sets differ in point count");
        for (a, b) in self.values_mut().zip(other.values()) {
            *a += b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// All entries flattened in field order: positions, rotations, log-scales, colors, opacities.
    pub fn flatten(&self) -> Vec<f64> {
        self.values().copied().collect()
    }
}
