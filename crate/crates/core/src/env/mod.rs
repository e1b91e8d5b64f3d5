//! Simulated home: message bus, devices, context store and the sofa classifier.

mod bus;
mod classifier;
mod device;
mod store;
mod tcp;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use thiserror::Error;

pub use bus::{Bus, BusMessage, Pattern, Subscription, Topic};
pub use classifier::{Occupancy, WeightClassifier};
pub use device::{
    legal_transition, status_set, Device, DeviceKind, DeviceSpec, FailureCode, FaultMode, FaultSpec, OpOutcome,
    PropertyChange, NONE,
};
pub use store::{atom_to_triple, triple_to_atom, ContextStore, Triple};
pub use tcp::{TcpBridge, TcpClient};

use crate::logic::{normalize_identifier, Atom};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvError {
    #[error("malformed topic `{0}`")]
    MalformedTopic(String),
    #[error("malformed subscription pattern `{0}`")]
    MalformedPattern(String),
    #[error("unknown device `{0}`")]
    UnknownDevice(String),
    #[error("device `{0}` declared twice")]
    DuplicateDevice(String),
    #[error("device `{device}`: {message}")]
    BadDevice { device: String, message: String },
    #[error("device `{device}` has no trigger `{trigger}`")]
    UnknownTrigger { device: String, trigger: String },
    #[error("trigger `{trigger}` on `{device}`: {message}")]
    BadTrigger { device: String, trigger: String, message: String },
    #[error("i/o: {0}")]
    Io(String),
}

struct Hosted {
    device: Device,
    ops: Subscription,
}

/// Devices attached to a bus, driven synchronously: operations queue on the bus
/// until [`pump`](Environment::pump) is called. Time is simulated.
pub struct Environment {
    bus: Bus,
    devices: BTreeMap<String, Hosted>,
    store: ContextStore,
    clock_ms: u64,
    rng: Option<ChaCha8Rng>,
}

impl Environment {
    pub fn new(bus: Bus, specs: &[DeviceSpec], seed: Option<u64>) -> Result<Self, EnvError> {
        let mut devices = BTreeMap::new();
        let mut store = ContextStore::new();
        for spec in specs {
            let device = Device::from_spec(spec)?;
            if devices.contains_key(&device.id) {
                return Err(EnvError::DuplicateDevice(device.id));
            }
            for a in device.beliefs() {
                store.assert_atom(&a);
            }
            let ops = bus.subscribe(&Topic::Operations { device: device.id.clone() }.to_string())?;
            devices.insert(device.id.clone(), Hosted { device, ops });
        }
        Ok(Environment {
            bus,
            devices,
            store,
            clock_ms: 0,
            rng: seed.map(ChaCha8Rng::seed_from_u64),
        })
    }

    pub fn bus(&self) -> &Bus {
        &self.bus
    }

    pub fn has_device(&self, id: &str) -> bool {
        self.devices.contains_key(id)
    }

    pub fn device(&self, id: &str) -> Option<&Device> {
        self.devices.get(id).map(|h| &h.device)
    }

    pub fn device_ids(&self) -> impl Iterator<Item = &String> {
        self.devices.keys()
    }

    pub fn store(&self) -> &ContextStore {
        &self.store
    }

    /// For belief changes that do not come from a device.
    pub fn store_mut(&mut self) -> &mut ContextStore {
        &mut self.store
    }

    pub fn now_ms(&self) -> u64 {
        self.clock_ms
    }

    pub fn advance(&mut self, ms: u64) {
        self.clock_ms += ms;
    }

    /// Beliefs implied by the current state of `devices`.
    pub fn beliefs_of<'a>(&self, devices: impl IntoIterator<Item = &'a String>) -> Vec<Atom> {
        devices
            .into_iter()
            .filter_map(|d| self.device(d))
            .flat_map(Device::beliefs)
            .collect()
    }

    fn publish_change(&mut self, ch: &PropertyChange) {
        for a in &ch.retract {
            self.store.retract_atom(a);
        }
        for a in &ch.assert {
            self.store.assert_atom(a);
        }
        let topic = Topic::Property { device: ch.device.clone(), name: ch.property.clone() };
        self.bus
            .publish(&topic.to_string(), ch.payload())
            .expect("property topics are well formed");
    }

    /// Handles every queued operation message. Returns how many were handled.
    pub fn pump(&mut self) -> usize {
        let mut handled = 0;
        let ids: Vec<String> = self.devices.keys().cloned().collect();
        for id in ids {
            while let Some(msg) = self.devices[&id].ops.try_recv() {
                handled += 1;
                self.clock_ms += 1;
                let req = msg.payload.get("req").cloned().unwrap_or(serde_json::Value::Null);
                let op = msg.payload.get("op").and_then(|v| v.as_str()).map(normalize_identifier);
                let args: Option<Vec<String>> = msg.payload.get("args").and_then(|v| v.as_array()).map(|xs| {
                    xs.iter()
                        .map(|x| x.as_str().map(str::to_string).unwrap_or_else(|| x.to_string()))
                        .collect()
                });
                let outcome = match (op, args) {
                    (Some(op), Some(args)) => {
                        self.devices.get_mut(&id).expect("device exists").device.operate(&op, &args)
                    }
                    _ => OpOutcome::Failed(FailureCode::DeviceError, "malformed operation".into()),
                };
                let signal = match outcome {
                    OpOutcome::Done(changes) => {
                        for ch in &changes {
                            self.publish_change(ch);
                        }
                        json!({ "req": req, "ok": true, "err": null })
                    }
                    OpOutcome::Failed(code, detail) => {
                        log::debug!("{id}: operation failed: {code} ({detail})");
                        json!({ "req": req, "ok": false, "err": code.code() })
                    }
                    OpOutcome::Silent => continue,
                };
                self.bus
                    .publish(&Topic::Signals { device: id.clone() }.to_string(), signal)
                    .expect("signal topics are well formed");
            }
        }
        handled
    }

    /// Runs a device script trigger and publishes the resulting property changes.
    pub fn trigger(&mut self, device: &str, name: &str, args: &[String]) -> Result<usize, EnvError> {
        let id = normalize_identifier(device);
        let mut args = args.to_vec();
        let host = self.devices.get_mut(&id).ok_or_else(|| EnvError::UnknownDevice(id.clone()))?;
        if name == "reading" && host.device.noise > 0.0 {
            if let (Some(rng), Some(w)) = (self.rng.as_mut(), args.first().and_then(|w| w.parse::<f64>().ok())) {
                let jitter: f64 = rng.gen_range(-1.0..=1.0) * host.device.noise;
                args[0] = format!("{}", w + jitter);
            }
        }
        let changes = host.device.trigger(name, &args)?;
        for ch in &changes {
            self.publish_change(ch);
        }
        Ok(changes.len())
    }
}
