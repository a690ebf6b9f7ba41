//! Compiled tip-path evaluation: piecewise line/arc/hold segments with
//! constant speeds, evaluated exactly at any time.

use nalgebra::Vector3;

use super::{PathSegment, SimError};

enum Piece {
    Hold {
        pos: Vector3<f64>,
    },
    Line {
        from: Vector3<f64>,
        dir: Vector3<f64>,
        speed: f64,
    },
    Arc {
        center: Vector3<f64>,
        axial: Vector3<f64>,
        u: Vector3<f64>,
        v: Vector3<f64>,
        radius: f64,
        /// Signed angular rate, rad/s.
        omega: f64,
    },
}

struct Timed {
    t_start: f64,
    t_end: f64,
    piece: Piece,
}

/// A motion profile compiled to closed-form pieces.
pub struct CompiledPath {
    pieces: Vec<Timed>,
    start: Vector3<f64>,
    final_pos: Vector3<f64>,
}

impl CompiledPath {
    pub fn compile(start_mm: [f64; 3], segments: &[PathSegment]) -> Result<Self, SimError> {
        let start = Vector3::from(start_mm);
        let mut pos = start;
        let mut t = 0.0f64;
        let mut pieces = Vec::new();
        for seg in segments {
            match seg {
                PathSegment::Hold { duration_s } => {
                    pieces.push(Timed {
                        t_start: t,
                        t_end: t + duration_s,
                        piece: Piece::Hold { pos },
                    });
                    t += duration_s;
                }
                PathSegment::Line { to_mm, speed_mm_s } => {
                    let to = Vector3::from(*to_mm);
                    let delta = to - pos;
                    let dist = delta.norm();
                    if dist == 0.0 {
                        continue;
                    }
                    let duration = dist / speed_mm_s;
                    pieces.push(Timed {
                        t_start: t,
                        t_end: t + duration,
                        piece: Piece::Line {
                            from: pos,
                            dir: delta / dist,
                            speed: *speed_mm_s,
                        },
                    });
                    t += duration;
                    pos = to;
                }
                PathSegment::Arc {
                    center_mm,
                    normal,
                    sweep_deg,
                    speed_mm_s,
                } => {
                    let center = Vector3::from(*center_mm);
                    let n = Vector3::from(*normal);
                    let n_norm = n.norm();
                    if n_norm == 0.0 {
                        return Err(SimError::InvalidConfig(
                            "arc normal must be nonzero".into(),
                        ));
                    }
                    let n_hat = n / n_norm;
                    let r0 = pos - center;
                    let axial = r0.dot(&n_hat) * n_hat;
                    let radial = r0 - axial;
                    let radius = radial.norm();
                    if radius < 1e-9 {
                        return Err(SimError::InvalidConfig(
                            "arc entry position coincides with its center".into(),
                        ));
                    }
                    let u = radial / radius;
                    let v = n_hat.cross(&u);
                    let sweep_rad = sweep_deg.to_radians();
                    let omega = (speed_mm_s / radius) * sweep_rad.signum();
                    let duration = sweep_rad.abs() * radius / speed_mm_s;
                    pieces.push(Timed {
                        t_start: t,
                        t_end: t + duration,
                        piece: Piece::Arc {
                            center,
                            axial,
                            u,
                            v,
                            radius,
                            omega,
                        },
                    });
                    t += duration;
                    pos = center + axial + radius * (sweep_rad.cos() * u + sweep_rad.sin() * v);
                }
            }
        }
        Ok(CompiledPath {
            pieces,
            start,
            final_pos: pos,
        })
    }

    /// Exact tip position at time `t` (seconds on the tracking timeline).
    pub fn position(&self, t: f64) -> Vector3<f64> {
        if self.pieces.is_empty() || t <= self.pieces[0].t_start {
            return self.start;
        }
        for p in &self.pieces {
            if t <= p.t_end {
                let tau = t - p.t_start;
                return match &p.piece {
                    Piece::Hold { pos } => *pos,
                    Piece::Line { from, dir, speed } => from + dir * (speed * tau),
                    Piece::Arc {
                        center,
                        axial,
                        u,
                        v,
                        radius,
                        omega,
                    } => {
                        let theta = omega * tau;
                        center + axial + *radius * (theta.cos() * u + theta.sin() * v)
                    }
                };
            }
        }
        self.final_pos
    }
}
