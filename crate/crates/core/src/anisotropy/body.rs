use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::vec2::Vec2;

/// A planar convex body containing the origin in its interior. Its Minkowski
/// functional is the gauge of an anisotropy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConvexBody {
    /// Convex hull of the listed vertices, counter-clockwise.
    Polytope { vertices: Vec<Vec2> },
    /// Disc with the given center and radius; not centered at the origin in
    /// general, which makes the gauge non-even.
    Disc { center: Vec2, radius: f64 },
    /// Unit ball of the ℓ_r norm, `r ∈ [1, ∞]`.
    EllR {
        #[serde(serialize_with = "ser_exponent", deserialize_with = "de_exponent")]
        r: f64,
    },
}

fn ser_exponent<S: Serializer>(r: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if r.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*r)
    }
}

fn de_exponent<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum NumOrStr {
        Num(f64),
        Str(String),
    }
    match NumOrStr::deserialize(d)? {
        NumOrStr::Num(v) => Ok(v),
        NumOrStr::Str(s) if matches!(s.to_ascii_lowercase().as_str(), "inf" | "infinity") => {
            Ok(f64::INFINITY)
        }
        NumOrStr::Str(s) => Err(serde::de::Error::custom(format!("invalid exponent {s:?}"))),
    }
}

impl ConvexBody {
    pub fn square() -> Self {
        ConvexBody::EllR { r: f64::INFINITY }
    }

    pub fn euclidean() -> Self {
        ConvexBody::EllR { r: 2.0 }
    }

    /// Checks convexity, orientation and that the origin is interior.
    pub fn validate(&self) -> Result<()> {
        match self {
            ConvexBody::Disc { center, radius } => {
                if !(*radius > 0.0) || !center.is_finite() {
                    return Err(Error::Configuration(format!("invalid disc radius {radius}")));
                }
                if center.norm() >= *radius {
                    return Err(Error::Configuration(
                        "origin is not interior to the disc body".into(),
                    ));
                }
            }
            ConvexBody::EllR { r } => {
                if !(*r >= 1.0) {
                    return Err(Error::Configuration(format!("ℓ_r exponent {r} < 1")));
                }
            }
            ConvexBody::Polytope { vertices } => {
                let n = vertices.len();
                if n < 3 {
                    return Err(Error::Configuration("polytope needs at least 3 vertices".into()));
                }
                for i in 0..n {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    let c = vertices[(i + 2) % n];
                    if (b - a).cross(c - b) <= 0.0 {
                        return Err(Error::Configuration(
                            "polytope vertices must be strictly convex and counter-clockwise"
                                .into(),
                        ));
                    }
                    // Origin strictly left of every edge.
                    if (b - a).cross(Vec2::ZERO - a) <= 0.0 {
                        return Err(Error::Configuration(
                            "origin is not interior to the polytope".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Membership test for the closed body.
    pub fn contains(&self, z: Vec2) -> bool {
        match self {
            ConvexBody::Disc { center, radius } => (z - *center).norm() <= *radius,
            ConvexBody::EllR { r } => ell_r_norm(z, *r) <= 1.0,
            ConvexBody::Polytope { vertices } => {
                let n = vertices.len();
                (0..n).all(|i| {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    (b - a).cross(z - a) >= 0.0
                })
            }
        }
    }

    /// Radius of a ball around the origin containing the body.
    pub fn bounding_radius(&self) -> f64 {
        match self {
            ConvexBody::Disc { center, radius } => center.norm() + radius,
            ConvexBody::EllR { r } => {
                if *r >= 2.0 {
                    2f64.sqrt()
                } else {
                    1.0
                }
            }
            ConvexBody::Polytope { vertices } => {
                vertices.iter().map(|v| v.norm()).fold(0.0, f64::max)
            }
        }
    }
}

pub(crate) fn ell_r_norm(z: Vec2, r: f64) -> f64 {
    let (a, b) = (z.x.abs(), z.y.abs());
    if r.is_infinite() {
        a.max(b)
    } else if r == 1.0 {
        a + b
    } else if r == 2.0 {
        z.norm()
    } else {
        let m = a.max(b);
        if m == 0.0 {
            return 0.0;
        }
        m * ((a / m).powf(r) + (b / m).powf(r)).powf(1.0 / r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serde_accepts_infinite_exponent() {
        let b: ConvexBody = serde_json::from_str(r#"{"kind":"ell_r","r":"inf"}"#).unwrap();
        assert_eq!(b, ConvexBody::square());
        let s = serde_json::to_string(&b).unwrap();
        assert_eq!(s, r#"{"kind":"ell_r","r":"inf"}"#);
    }

    #[test]
    fn validation_catches_bad_bodies() {
        let off = ConvexBody::Disc { center: Vec2::new(2.0, 0.0), radius: 1.0 };
        assert!(matches!(off.validate(), Err(Error::Configuration(_))));
        let cw = ConvexBody::Polytope {
            vertices: vec![Vec2::new(1.0, 1.0), Vec2::new(1.0, -1.0), Vec2::new(-1.0, 0.0)],
        };
        assert!(cw.validate().is_err());
        let ok = ConvexBody::Polytope {
            vertices: vec![Vec2::new(1.0, -1.0), Vec2::new(1.0, 1.0), Vec2::new(-1.0, 0.0)],
        };
        ok.validate().unwrap();
    }
}
