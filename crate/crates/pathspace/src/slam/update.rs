//! Joseph-form Kalman update with direct (identity) observation of the
//! affected control-point coordinates.

use nalgebra::{DMatrix, DVector};

use super::{PathSpaceFilter, SplineMeasurement};
use crate::error::FilterError;

impl PathSpaceFilter {
    /// Fuse a measurement spline. The innovation is measured minus current
    /// control values; the gain is built from the joint-covariance columns
    /// of the affected block, so the pose and all other splines move through
    /// their cross terms.
    pub fn kalman_update(&mut self, meas: &SplineMeasurement) -> Result<(), FilterError> {
        let belief = &mut self.belief;
        let spline = belief
            .spline(meas.label)
            .ok_or_else(|| FilterError::InvalidState(format!("no spline for {}", meas.label)))?;
        let n_ctrl = spline.n_control();
        if meas.len == 0 || meas.len > n_ctrl {
            return Err(FilterError::InvalidArgument("bad affected range".into()));
        }
        let dim = belief.dim();
        let w = 2 * meas.len;

        // State indices of the observed coordinates.
        let cols: Vec<usize> = (0..meas.len)
            .flat_map(|i| {
                let ctrl = (meas.start + i) % n_ctrl;
                [belief.coord_index(meas.label, ctrl, 0), belief.coord_index(meas.label, ctrl, 1)]
            })
            .collect();

        let state = belief.state_mean();
        let mut innovation = DVector::zeros(w);
        for (i, &c) in cols.iter().enumerate() {
            innovation[i] = meas.control_values[i] - state[c];
        }

        let p = belief.covariance().clone();
        let mut p_cols = DMatrix::zeros(dim, w);
        for (i, &c) in cols.iter().enumerate() {
            p_cols.column_mut(i).copy_from(&p.column(c));
        }
        let mut s = meas.covariance.clone();
        for (i, &ci) in cols.iter().enumerate() {
            for (j, &cj) in cols.iter().enumerate() {
                s[(i, j)] += p[(ci, cj)];
            }
        }
        let s_inv = s
            .clone()
            .try_inverse()
            .ok_or_else(|| FilterError::Numeric("innovation covariance not invertible".into()))?;
        let k = &p_cols * &s_inv; // dim x w

        let delta = &k * &innovation;
        belief.apply_delta(&delta);

        // Joseph form: P' = (I - KH) P (I - KH)^T + K R K^T.
        let ap = &p - &k * p_cols.transpose();
        let mut ap_cols = DMatrix::zeros(dim, w);
        for (i, &c) in cols.iter().enumerate() {
            ap_cols.column_mut(i).copy_from(&ap.column(c));
        }
        let joseph = &ap - ap_cols * k.transpose() + &k * &meas.covariance * k.transpose();
        belief.set_covariance(crate::uncertainty::symmetrize(&joseph));
        Ok(())
    }
}
