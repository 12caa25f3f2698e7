/// Initial Adam learning rate.
pub const INITIAL_LR: f64 = 0.0005;
/// Per-epoch multiplicative decay.
pub const LR_DECAY: f64 = 0.96;
/// Lower bound of the decayed learning rate.
pub const LR_FLOOR: f64 = 0.0001;

/// `0.0005 · 0.96^epoch`, never below `0.0001`.
pub fn lr_at_epoch(epoch: usize) -> f64 {
    LrSchedule::default().at(epoch)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LrSchedule {
    Decay { initial: f64, factor: f64, floor: f64 },
    Constant(f64),
}

impl Default for LrSchedule {
    fn default() -> Self {
        LrSchedule::Decay { initial: INITIAL_LR, factor: LR_DECAY, floor: LR_FLOOR }
    }
}

impl LrSchedule {
    pub fn at(&self, epoch: usize) -> f64 {
        match *self {
            LrSchedule::Decay { initial, factor, floor } => {
                let exponent = i32::try_from(epoch).unwrap_or(i32::MAX);
                (initial * factor.powi(exponent)).max(floor.min(initial))
            }
            LrSchedule::Constant(lr) => lr,
        }
    }
}
