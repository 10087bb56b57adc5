use std::sync::Arc;

/// Ordered description of the fields making up an observation.
///
/// The agent block comes first and is shared by every environment in an
/// experiment; the rest block carries task sensors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObsLayout {
    pub agent: Vec<(String, usize)>,
    pub rest: Vec<(String, usize)>,
}

impl ObsLayout {
    pub fn new(agent: Vec<(String, usize)>, rest: Vec<(String, usize)>) -> Self {
        Self { agent, rest }
    }

    pub fn agent_dim(&self) -> usize {
        self.agent.iter().map(|(_, d)| d).sum()
    }

    pub fn rest_dim(&self) -> usize {
        self.rest.iter().map(|(_, d)| d).sum()
    }

    pub fn full_dim(&self) -> usize {
        self.agent_dim() + self.rest_dim()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactoredObservation {
    pub agent: Vec<f64>,
    pub rest: Vec<f64>,
    pub layout: Arc<ObsLayout>,
}

impl FactoredObservation {
    pub fn new(agent: Vec<f64>, rest: Vec<f64>, layout: Arc<ObsLayout>) -> Self {
        debug_assert_eq!(agent.len(), layout.agent_dim());
        debug_assert_eq!(rest.len(), layout.rest_dim());
        Self {
            agent,
            rest,
            layout,
        }
    }

    /// Agent block followed by the rest block.
    pub fn full(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.agent.len() + self.rest.len());
        out.extend_from_slice(&self.agent);
        out.extend_from_slice(&self.rest);
        out
    }

    pub fn dim(&self) -> usize {
        self.agent.len() + self.rest.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_is_concatenation() {
        let layout = Arc::new(ObsLayout::new(
            vec![("velocity".into(), 2)],
            vec![("walls".into(), 3)],
        ));
        let obs = FactoredObservation::new(vec![1.0, 2.0], vec![3.0, 4.0, 5.0], layout);
        assert_eq!(obs.full(), vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(obs.dim(), 5);
        assert_eq!(obs.layout.full_dim(), 5);
    }
}
