use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::logic::{normalize_identifier, Atom};

use super::classifier::{Occupancy, WeightClassifier};
use super::EnvError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeviceKind {
    Tv,
    Phone,
    Pc,
    Sofa,
    /// Any declared status set, every change between distinct states allowed.
    Generic,
}

/// Why a command did not complete.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureCode {
    UnknownDevice,
    UnknownOperation,
    DeviceError,
    IllegalTransition,
    Timeout,
}

impl FailureCode {
    pub fn code(self) -> &'static str {
        match self {
            FailureCode::UnknownDevice => "unknown_device",
            FailureCode::UnknownOperation => "unknown_operation",
            FailureCode::DeviceError => "device_error",
            FailureCode::IllegalTransition => "illegal_transition",
            FailureCode::Timeout => "timeout",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        Some(match code {
            "unknown_device" => FailureCode::UnknownDevice,
            "unknown_operation" => FailureCode::UnknownOperation,
            "device_error" => FailureCode::DeviceError,
            "illegal_transition" => FailureCode::IllegalTransition,
            "timeout" => FailureCode::Timeout,
            _ => return None,
        })
    }
}

impl fmt::Display for FailureCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FaultMode {
    /// Reply with `device_error`.
    Reject,
    /// Never reply, so the caller times out.
    Silent,
}

/// Scripted misbehaviour: applies to operation `op` (any if absent) on the
/// `call`-th invocation (every invocation if absent), counting from 1.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub mode: FaultMode,
    #[serde(default)]
    pub op: Option<String>,
    #[serde(default)]
    pub call: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSpec {
    pub id: String,
    pub kind: DeviceKind,
    #[serde(default)]
    pub status: Option<String>,
    /// Status set of a generic device.
    #[serde(default)]
    pub states: Vec<String>,
    #[serde(default)]
    pub channel: Option<String>,
    #[serde(default)]
    pub classifier: Option<WeightClassifier>,
    /// Amplitude in kg of the seeded noise added to sofa readings.
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub fault: Option<FaultSpec>,
}

/// One observable property change together with the belief delta it implies.
#[derive(Clone, Debug, PartialEq)]
pub struct PropertyChange {
    pub device: String,
    pub property: String,
    pub previous: Option<String>,
    pub value: String,
    pub assert: Vec<Atom>,
    pub retract: Vec<Atom>,
}

impl PropertyChange {
    pub fn payload(&self) -> serde_json::Value {
        let strs = |v: &[Atom]| v.iter().map(|a| a.to_string()).collect::<Vec<_>>();
        serde_json::json!({
            "value": self.value,
            "previous": self.previous,
            "assert": strs(&self.assert),
            "retract": strs(&self.retract),
        })
    }
}

#[derive(Debug, PartialEq)]
pub enum OpOutcome {
    Done(Vec<PropertyChange>),
    Failed(FailureCode, String),
    Silent,
}

pub const NONE: &str = "none";

const TV_STATES: [&str; 5] = ["off", "standby", "playing", "mute", "recording"];
const PHONE_STATES: [&str; 4] = ["idle", "ringing", "voicemail", "in_call"];
const PC_STATES: [&str; 3] = ["off", "on", "sleep"];

/// Legal status changes of the built-in kinds. Self-loops are never legal.
pub fn legal_transition(kind: DeviceKind, from: &str, to: &str, states: &[String]) -> bool {
    match kind {
        DeviceKind::Tv => matches!(
            (from, to),
            ("off", "standby")
                | ("standby", "off" | "playing")
                | ("playing", "standby" | "mute" | "recording" | "off")
                | ("mute", "playing" | "recording" | "standby" | "off")
                | ("recording", "playing" | "mute" | "standby" | "off")
        ),
        DeviceKind::Phone => matches!(
            (from, to),
            ("idle", "ringing" | "voicemail" | "in_call")
                | ("ringing", "idle" | "voicemail" | "in_call")
                | ("voicemail", "idle" | "ringing")
                | ("in_call", "idle")
        ),
        DeviceKind::Pc => matches!(
            (from, to),
            ("off", "on") | ("on", "off" | "sleep") | ("sleep", "on" | "off")
        ),
        DeviceKind::Sofa => false,
        DeviceKind::Generic => from != to && states.iter().any(|s| s == to) && states.iter().any(|s| s == from),
    }
}

/// Status set of a device kind.
pub fn status_set(kind: DeviceKind, states: &[String]) -> Vec<String> {
    let fixed: &[&str] = match kind {
        DeviceKind::Tv => &TV_STATES,
        DeviceKind::Phone => &PHONE_STATES,
        DeviceKind::Pc => &PC_STATES,
        DeviceKind::Sofa => &[],
        DeviceKind::Generic => return states.to_vec(),
    };
    fixed.iter().map(|s| s.to_string()).collect()
}

/// A simulated device artifact: observable properties, operations and scripts.
#[derive(Clone, Debug)]
pub struct Device {
    pub id: String,
    pub kind: DeviceKind,
    states: Vec<String>,
    props: BTreeMap<String, String>,
    caller_types: BTreeMap<String, String>,
    last_occupant: Option<String>,
    classifier: Option<WeightClassifier>,
    pub noise: f64,
    fault: Option<FaultSpec>,
    calls: u32,
}

impl Device {
    pub fn from_spec(spec: &DeviceSpec) -> Result<Self, EnvError> {
        let id = normalize_identifier(&spec.id);
        let states: Vec<String> = spec.states.iter().map(|s| normalize_identifier(s)).collect();
        let mut props = BTreeMap::new();
        let bad = |m: String| EnvError::BadDevice { device: id.clone(), message: m };
        let allowed = status_set(spec.kind, &states);
        match spec.kind {
            DeviceKind::Sofa => {
                if spec.classifier.is_none() {
                    return Err(bad("a sofa needs a classifier".into()));
                }
                props.insert("occupant".to_string(), NONE.to_string());
            }
            kind => {
                let default = match kind {
                    DeviceKind::Tv | DeviceKind::Pc => Some("off"),
                    DeviceKind::Phone => Some("idle"),
                    _ => states.first().map(String::as_str),
                };
                let status = spec
                    .status
                    .as_deref()
                    .map(normalize_identifier)
                    .or(default.map(str::to_string))
                    .ok_or_else(|| bad("a generic device needs at least one state".into()))?;
                if !allowed.contains(&status) {
                    return Err(bad(format!("`{status}` is not a status of this device")));
                }
                props.insert("status".to_string(), status);
            }
        }
        if spec.kind == DeviceKind::Tv {
            props.insert(
                "channel".to_string(),
                spec.channel.as_deref().map(normalize_identifier).unwrap_or_else(|| NONE.into()),
            );
        }
        if spec.kind == DeviceKind::Phone {
            props.insert("caller".to_string(), NONE.to_string());
        }
        Ok(Device {
            id,
            kind: spec.kind,
            states,
            props,
            caller_types: BTreeMap::new(),
            last_occupant: None,
            classifier: spec.classifier.clone(),
            noise: spec.noise,
            fault: spec.fault.clone(),
            calls: 0,
        })
    }

    pub fn property(&self, name: &str) -> Option<&str> {
        self.props.get(name).map(String::as_str)
    }

    pub fn properties(&self) -> &BTreeMap<String, String> {
        &self.props
    }

    pub fn statuses(&self) -> Vec<String> {
        status_set(self.kind, &self.states)
    }

    fn beliefs_for(&self, name: &str, value: &str) -> Vec<Atom> {
        let id = self.id.as_str();
        match name {
            "status" => vec![Atom::ground("deviceStatus", &[id, value])],
            "channel" if value == NONE => vec![],
            "channel" => vec![Atom::ground("displaying", &[id, value])],
            "caller" if value == NONE => vec![],
            "caller" => {
                let mut v = vec![Atom::ground("incomingCall", &[id, value])];
                if let Some(t) = self.caller_types.get(value) {
                    v.push(Atom::ground("callerType", &[value, t]));
                }
                v
            }
            "occupant" if value == NONE => match &self.last_occupant {
                Some(u) => vec![Atom::ground("isStand", &[u])],
                None => vec![],
            },
            "occupant" => vec![Atom::ground("beSeated", &[value, id])],
            other => vec![Atom::ground(other, &[id, value])],
        }
    }

    /// Beliefs implied by the current property values.
    pub fn beliefs(&self) -> Vec<Atom> {
        self.props.iter().flat_map(|(n, v)| self.beliefs_for(n, v)).collect()
    }

    /// Sets a property and returns the change, or `None` if the value is unchanged.
    fn set(&mut self, name: &str, value: String) -> Option<PropertyChange> {
        let previous = self.props.get(name).cloned();
        if previous.as_deref() == Some(value.as_str()) {
            return None;
        }
        let old = previous.as_deref().map(|p| self.beliefs_for(name, p)).unwrap_or_default();
        if name == "occupant" && value != NONE {
            self.last_occupant = Some(value.clone());
        }
        self.props.insert(name.to_string(), value.clone());
        let new = self.beliefs_for(name, &value);
        Some(PropertyChange {
            device: self.id.clone(),
            property: name.to_string(),
            retract: old.iter().filter(|a| !new.contains(a)).cloned().collect(),
            assert: new.iter().filter(|a| !old.contains(a)).cloned().collect(),
            previous,
            value,
        })
    }

    /// Runs operation `op`; each call counts toward scripted faults.
    pub fn operate(&mut self, op: &str, args: &[String]) -> OpOutcome {
        self.calls += 1;
        if let Some(f) = &self.fault {
            let op_hit = f.op.as_deref().is_none_or(|o| o == op);
            let call_hit = f.call.is_none_or(|n| n == self.calls);
            if op_hit && call_hit {
                return match f.mode {
                    FaultMode::Reject => OpOutcome::Failed(FailureCode::DeviceError, "scripted rejection".into()),
                    FaultMode::Silent => OpOutcome::Silent,
                };
            }
        }
        let one = |args: &[String]| match args {
            [a] => Ok(normalize_identifier(a)),
            _ => Err(OpOutcome::Failed(FailureCode::DeviceError, format!("{op} takes one argument"))),
        };
        match (op, self.kind) {
            ("set_status", kind) if kind != DeviceKind::Sofa => {
                let to = match one(args) {
                    Ok(t) => t,
                    Err(e) => return e,
                };
                let from = self.props["status"].clone();
                if !legal_transition(kind, &from, &to, &self.states) {
                    return OpOutcome::Failed(FailureCode::IllegalTransition, format!("{from} -> {to}"));
                }
                OpOutcome::Done(self.set("status", to).into_iter().collect())
            }
            ("set_channel", DeviceKind::Tv) => {
                let c = match one(args) {
                    Ok(c) => c,
                    Err(e) => return e,
                };
                if self.props["status"] == "off" {
                    return OpOutcome::Failed(FailureCode::IllegalTransition, "tv is off".into());
                }
                OpOutcome::Done(self.set("channel", c).into_iter().collect())
            }
            _ => OpOutcome::Failed(FailureCode::UnknownOperation, format!("{op} on {}", self.id)),
        }
    }

    /// Runs a scripted trigger (sensor reading, incoming call, forced property).
    pub fn trigger(&mut self, name: &str, args: &[String]) -> Result<Vec<PropertyChange>, EnvError> {
        let bad = |m: &str| EnvError::BadTrigger {
            device: self.id.clone(),
            trigger: name.to_string(),
            message: m.to_string(),
        };
        let change = match (name, self.kind) {
            ("reading", DeviceKind::Sofa) => {
                let [w] = args else { return Err(bad("expects one weight")) };
                let w: f64 = w.parse().map_err(|_| bad("weight is not a number"))?;
                let classifier = self.classifier.as_ref().expect("sofa has a classifier");
                match classifier.classify(w) {
                    Occupancy::User(u) => self.set("occupant", normalize_identifier(&u)),
                    Occupancy::Vacant => self.set("occupant", NONE.into()),
                    Occupancy::Unknown => None,
                }
            }
            ("incoming_call", DeviceKind::Phone) => {
                let [caller, kind] = args else { return Err(bad("expects caller and caller type")) };
                let caller = normalize_identifier(caller);
                self.caller_types.insert(caller.clone(), normalize_identifier(kind));
                self.set("caller", caller)
            }
            ("hang_up", DeviceKind::Phone) => self.set("caller", NONE.into()),
            ("set", _) => {
                let [prop, value] = args else { return Err(bad("expects property and value")) };
                self.set(&normalize_identifier(prop), normalize_identifier(value))
            }
            _ => {
                return Err(EnvError::UnknownTrigger { device: self.id.clone(), trigger: name.to_string() })
            }
        };
        Ok(change.into_iter().collect())
    }
}
