use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::LogisticsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PortRole {
    Origin,
    Transshipment,
    Destination,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Port {
    pub port_code: String,
    pub role: PortRole,
}

pub fn valid_port_code(code: &str) -> bool {
    !code.is_empty() && code.chars().all(|c| c.is_ascii_uppercase() || c.is_ascii_digit())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShippingLane {
    pub lane_id: String,
    pub ports: Vec<Port>,
    /// Free dwell days per port. Required for every port except the destination.
    pub dwell_limit_days: BTreeMap<String, u32>,
}

impl ShippingLane {
    pub fn validate(&self) -> Result<(), LogisticsError> {
        let bad = |why: String| Err(LogisticsError::InvalidLane { lane_id: self.lane_id.clone(), reason: why });
        if self.ports.len() < 2 {
            return bad("a lane needs at least two ports".into());
        }
        for p in &self.ports {
            if !valid_port_code(&p.port_code) {
                return bad(format!("port code {:?} must be uppercase alphanumeric", p.port_code));
            }
        }
        let last = self.ports.len() - 1;
        for (i, p) in self.ports.iter().enumerate() {
            let want = match i {
                0 => PortRole::Origin,
                i if i == last => PortRole::Destination,
                _ => PortRole::Transshipment,
            };
            if p.role != want {
                return bad(format!("port {} at position {i} must be {want:?}", p.port_code));
            }
            if i != last && !self.dwell_limit_days.contains_key(&p.port_code) {
                return bad(format!("no dwell limit for {}", p.port_code));
            }
        }
        let mut codes: Vec<&str> = self.ports.iter().map(|p| p.port_code.as_str()).collect();
        codes.sort_unstable();
        if codes.windows(2).any(|w| w[0] == w[1]) {
            return bad("a port appears twice".into());
        }
        Ok(())
    }

    pub fn port_index(&self, code: &str) -> Option<usize> {
        self.ports.iter().position(|p| p.port_code == code)
    }

    pub fn origin(&self) -> &str {
        &self.ports[0].port_code
    }

    pub fn destination(&self) -> &str {
        &self.ports[self.ports.len() - 1].port_code
    }

    pub fn transshipment_ports(&self) -> impl Iterator<Item = &str> {
        self.ports.iter().filter(|p| p.role == PortRole::Transshipment).map(|p| p.port_code.as_str())
    }

    pub fn dwell_limit(&self, port: &str) -> Option<u32> {
        self.dwell_limit_days.get(port).copied()
    }

    /// Every milestone a shipment on this lane passes, in order.
    pub fn journey(&self) -> Vec<Milestone> {
        let mut out = vec![Milestone::ContainerLoadedOnVessel];
        for (i, p) in self.ports.iter().enumerate() {
            if i > 0 {
                out.push(Milestone::VesselArrival(p.port_code.clone()));
            }
            if i + 1 < self.ports.len() {
                out.push(Milestone::VesselDeparture(p.port_code.clone()));
            }
        }
        out.push(Milestone::ContainerDischarge);
        out.push(Milestone::DeliveryComplete);
        out
    }

    /// Port-bearing milestones in journey order: Departure(origin), Arrival(t1), Departure(t1), … Arrival(dest).
    pub fn port_events(&self) -> Vec<Milestone> {
        self.journey().into_iter().filter(|m| m.port().is_some()).collect()
    }

    /// Whether the milestone names a port on this lane (milestones without a port always belong).
    pub fn covers(&self, m: &Milestone) -> bool {
        match m.port() {
            None => true,
            Some(p) => match (m, self.port_index(p)) {
                (_, None) => false,
                (Milestone::VesselDeparture(_), Some(i)) => i + 1 < self.ports.len(),
                (Milestone::VesselArrival(_), Some(i)) => i > 0,
                _ => true,
            },
        }
    }
}

/// A tracked step of container transport.
///
/// Written in files and on the command line as `ContainerLoadedOnVessel`,
/// `VesselDeparture(CNSHA)`, `VesselArrival(SGSIN)`, `ContainerDischarge`,
/// `DeliveryComplete`. `VesselDeparture:CNSHA` is also accepted.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Milestone {
    ContainerLoadedOnVessel,
    VesselDeparture(String),
    VesselArrival(String),
    ContainerDischarge,
    DeliveryComplete,
}

impl Milestone {
    pub fn port(&self) -> Option<&str> {
        match self {
            Milestone::VesselDeparture(p) | Milestone::VesselArrival(p) => Some(p),
            _ => None,
        }
    }
}

impl fmt::Display for Milestone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Milestone::ContainerLoadedOnVessel => f.write_str("ContainerLoadedOnVessel"),
            Milestone::VesselDeparture(p) => write!(f, "VesselDeparture({p})"),
            Milestone::VesselArrival(p) => write!(f, "VesselArrival({p})"),
            Milestone::ContainerDischarge => f.write_str("ContainerDischarge"),
            Milestone::DeliveryComplete => f.write_str("DeliveryComplete"),
        }
    }
}

impl FromStr for Milestone {
    type Err = LogisticsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || LogisticsError::BadMilestone(s.to_string());
        let (name, port) = if let Some(open) = s.find('(') {
            let inner = s[open + 1..].strip_suffix(')').ok_or_else(bad)?;
            (&s[..open], Some(inner))
        } else if let Some((n, p)) = s.split_once(':') {
            (n, Some(p))
        } else {
            (s, None)
        };
        let port = port.map(|p| p.trim().to_string());
        if let Some(p) = &port {
            if !valid_port_code(p) {
                return Err(bad());
            }
        }
        match (name.trim(), port) {
            ("ContainerLoadedOnVessel", None) => Ok(Milestone::ContainerLoadedOnVessel),
            ("VesselDeparture", Some(p)) => Ok(Milestone::VesselDeparture(p)),
            ("VesselArrival", Some(p)) => Ok(Milestone::VesselArrival(p)),
            ("ContainerDischarge", None) => Ok(Milestone::ContainerDischarge),
            ("DeliveryComplete", None) => Ok(Milestone::DeliveryComplete),
            _ => Err(bad()),
        }
    }
}

impl Serialize for Milestone {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Milestone {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn lane() -> ShippingLane {
        serde_json::from_str(
            r#"{"lane_id":"SHA-SIN-RTM",
                "ports":[{"port_code":"CNSHA","role":"Origin"},
                         {"port_code":"SGSIN","role":"Transshipment"},
                         {"port_code":"NLRTM","role":"Destination"}],
                "dwell_limit_days":{"CNSHA":1,"SGSIN":1}}"#,
        )
        .unwrap()
    }

    #[test]
    fn journey_order() {
        let j: Vec<String> = lane().journey().iter().map(|m| m.to_string()).collect();
        assert_eq!(
            j,
            [
                "ContainerLoadedOnVessel",
                "VesselDeparture(CNSHA)",
                "VesselArrival(SGSIN)",
                "VesselDeparture(SGSIN)",
                "VesselArrival(NLRTM)",
                "ContainerDischarge",
                "DeliveryComplete"
            ]
        );
    }

    #[test]
    fn lane_validation() {
        assert!(lane().validate().is_ok());
        let mut l = lane();
        l.dwell_limit_days.remove("SGSIN");
        assert!(l.validate().is_err());
        let mut l = lane();
        l.ports[1].role = PortRole::Destination;
        assert!(l.validate().is_err());
        let mut l = lane();
        l.ports[0].port_code = "cnsha".into();
        assert!(l.validate().is_err());
        let mut l = lane();
        l.ports.truncate(1);
        assert!(l.validate().is_err());
    }

    #[test]
    fn milestone_parse_forms() {
        assert_eq!("VesselArrival(SGSIN)".parse::<Milestone>().unwrap(), Milestone::VesselArrival("SGSIN".into()));
        assert_eq!("VesselDeparture:CNSHA".parse::<Milestone>().unwrap(), Milestone::VesselDeparture("CNSHA".into()));
        assert!("VesselArrival".parse::<Milestone>().is_err());
        assert!("DeliveryComplete(X)".parse::<Milestone>().is_err());
        assert!("VesselArrival(sg)".parse::<Milestone>().is_err());
        let m = Milestone::VesselDeparture("SGSIN".into());
        assert_eq!(serde_json::to_string(&m).unwrap(), "\"VesselDeparture(SGSIN)\"");
    }

    #[test]
    fn covers_checks_port_direction() {
        let l = lane();
        assert!(l.covers(&Milestone::VesselDeparture("CNSHA".into())));
        assert!(!l.covers(&Milestone::VesselArrival("CNSHA".into())));
        assert!(!l.covers(&Milestone::VesselDeparture("NLRTM".into())));
        assert!(!l.covers(&Milestone::VesselArrival("USNYC".into())));
        assert!(l.covers(&Milestone::DeliveryComplete));
    }
}
