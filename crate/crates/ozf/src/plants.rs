//! Reference plants.

use crate::lti::StateSpaceModel;

/// `(1.1z + 0.6)/(z² + 1.8z + 0.9)`; Nyquist value about 2.17.
pub fn example() -> StateSpaceModel {
    StateSpaceModel::from_transfer_function(&[1.1, 0.6], &[1.0, 1.8, 0.9]).expect("valid plant")
}

/// `−z/(z² − 1.8z + 0.81)`, a double pole at `0.9`.
pub fn double_pole() -> StateSpaceModel {
    StateSpaceModel::from_transfer_function(&[-1.0, 0.0], &[1.0, -1.8, 0.81]).expect("valid plant")
}
