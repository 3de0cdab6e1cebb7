//! Bus voltage state vectors.

use serde::{Deserialize, Serialize};

/// Which power-flow model a state or measurement set belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Full AC model: magnitudes and angles.
    #[default]
    Ac,
    /// Linear DC model: angles only, unit magnitudes.
    Dc,
}

/// Which slack-bus quantities are held fixed as the estimation reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    /// Only the slack angle (pinned at 0).
    SlackAngle,
    /// Slack angle at 0 and slack magnitude at its scheduled value.
    #[default]
    SlackVoltage,
}

impl Reference {
    /// Pinned components at the slack bus for `mode`.
    pub fn components(self, mode: Mode) -> &'static [Component] {
        match (self, mode) {
            (Reference::SlackVoltage, Mode::Ac) => &[Component::Vm, Component::Va],
            _ => &[Component::Va],
        }
    }
}

/// Component of a bus state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    Vm,
    Va,
}

impl Component {
    pub fn label(self) -> &'static str {
        match self {
            Component::Vm => "vm",
            Component::Va => "va",
        }
    }
}

/// Per-bus voltages in canonical bus order.
///
/// The flat layout is all magnitudes followed by all angles (AC), or the
/// angles alone (DC, where `vm` is empty).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub vm: Vec<f64>,
    pub va: Vec<f64>,
}

impl StateVector {
    pub fn new(vm: Vec<f64>, va: Vec<f64>) -> Self {
        assert_eq!(vm.len(), va.len(), "vm/va length mismatch");
        Self { vm, va }
    }

    pub fn angles_only(va: Vec<f64>) -> Self {
        Self { vm: Vec::new(), va }
    }

    pub fn flat_start(n_bus: usize, mode: Mode) -> Self {
        match mode {
            Mode::Ac => Self::new(vec![1.0; n_bus], vec![0.0; n_bus]),
            Mode::Dc => Self::angles_only(vec![0.0; n_bus]),
        }
    }

    pub fn mode(&self) -> Mode {
        if self.vm.is_empty() && !self.va.is_empty() {
            Mode::Dc
        } else {
            Mode::Ac
        }
    }

    pub fn n_bus(&self) -> usize {
        self.va.len()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.vm.iter().chain(self.va.iter()).copied().collect()
    }

    /// Inverse of [`to_flat`](Self::to_flat).
    pub fn from_flat(mode: Mode, flat: &[f64]) -> Self {
        match mode {
            Mode::Ac => {
                assert!(flat.len().is_multiple_of(2), "AC flat state must have even length");
                let n = flat.len() / 2;
                Self::new(flat[..n].to_vec(), flat[n..].to_vec())
            }
            Mode::Dc => Self::angles_only(flat.to_vec()),
        }
    }

    /// The same state viewed in another mode (DC drops the magnitudes; AC
    /// fills them with 1.0).
    pub fn in_mode(&self, mode: Mode) -> Self {
        match (mode, self.mode()) {
            (Mode::Dc, Mode::Ac) => Self::angles_only(self.va.clone()),
            (Mode::Ac, Mode::Dc) => Self::new(vec![1.0; self.n_bus()], self.va.clone()),
            _ => self.clone(),
        }
    }

    pub fn get(&self, bus: usize, component: Component) -> Option<f64> {
        match component {
            Component::Vm => self.vm.get(bus).copied(),
            Component::Va => self.va.get(bus).copied(),
        }
    }

    /// Magnitude, treating DC states as unit magnitude.
    pub fn vm_or_unit(&self, bus: usize) -> f64 {
        self.vm.get(bus).copied().unwrap_or(1.0)
    }
}
