use crate::model::{GroupSet, ParamGroup};

/// Per-group learning rates, deepest group first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrLadder(pub [f64; 4]);

impl LrLadder {
    pub fn rate(&self, g: ParamGroup) -> f64 {
        self.0[g.index()]
    }

    pub fn rates(&self) -> [f64; 4] {
        self.0
    }
}

/// Heads get `base_lr`; with `discriminative`, each deeper group gets half the
/// rate of the group above it.
pub fn lr_ladder(base_lr: f64, discriminative: bool) -> LrLadder {
    let mut rates = [base_lr; 4];
    if discriminative {
        for i in (0..3).rev() {
            rates[i] = rates[i + 1] / 2.0;
        }
    }
    LrLadder(rates)
}

/// Which groups train in a given epoch (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FreezeSchedule {
    n_groups: usize,
    gradual: bool,
}

impl FreezeSchedule {
    /// With gradual unfreezing, epoch `e` trains the top `e` groups.
    pub fn unfrozen(&self, epoch: usize) -> GroupSet {
        if self.gradual {
            GroupSet::top(epoch.min(self.n_groups))
        } else {
            GroupSet::top(self.n_groups)
        }
    }

    pub fn is_gradual(&self) -> bool {
        self.gradual
    }

    /// First epoch in which `g` trains.
    pub fn unfreeze_epoch(&self, g: ParamGroup) -> usize {
        if self.gradual {
            ParamGroup::ALL.len() - g.index()
        } else {
            1
        }
    }
}

/// Schedule over the top `n_groups` groups (clamped to 1..=4).
pub fn freeze_schedule(n_groups: usize, gradual: bool) -> FreezeSchedule {
    FreezeSchedule {
        n_groups: n_groups.clamp(1, ParamGroup::ALL.len()),
        gradual,
    }
}
