use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{LogisticsError, Milestone};

/// Hours since the scenario epoch.
pub type Hours = i64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EventStatus {
    Planned,
    Estimated,
    Actual,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MilestoneEvent {
    pub shipment_id: String,
    pub milestone: Milestone,
    pub status: EventStatus,
    pub source: String,
    pub occurrence_time: Hours,
    pub emitted_at: Hours,
    /// Assigned by [`Timeline::record_event`]; any incoming value is overwritten.
    #[serde(default)]
    pub emission_seq: u64,
}

type EventKey = (String, Milestone, EventStatus, String);

/// Every emission ever recorded, plus the latest-per-source index.
///
/// Re-emissions from the same source for the same `(shipment, milestone,
/// status)` supersede earlier ones for all reads; the superseded events stay
/// in [`Timeline::all_events`].
#[derive(Debug, Clone, Default)]
pub struct Timeline {
    events: Vec<MilestoneEvent>,
    effective: BTreeMap<EventKey, usize>,
    next_seq: u64,
}

impl Timeline {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_event(&mut self, mut event: MilestoneEvent) -> Result<&MilestoneEvent, LogisticsError> {
        if event.status == EventStatus::Actual {
            if let Some(prev) = self.actual(&event.shipment_id, &event.milestone) {
                return Err(LogisticsError::DuplicateActual {
                    shipment_id: event.shipment_id,
                    milestone: event.milestone,
                    first_source: prev.source.clone(),
                });
            }
        }
        event.emission_seq = self.next_seq;
        self.next_seq += 1;
        let key = (event.shipment_id.clone(), event.milestone.clone(), event.status, event.source.clone());
        self.effective.insert(key, self.events.len());
        self.events.push(event);
        Ok(self.events.last().expect("just pushed"))
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn all_events(&self) -> &[MilestoneEvent] {
        &self.events
    }

    /// Latest emission for every `(shipment, milestone, status, source)`, in key order.
    pub fn effective_events(&self) -> impl Iterator<Item = &MilestoneEvent> {
        self.effective.values().map(|&i| &self.events[i])
    }

    pub fn has_shipment(&self, shipment_id: &str) -> bool {
        self.events.iter().any(|e| e.shipment_id == shipment_id)
    }

    /// One effective event per source for the given status.
    pub fn by_source(&self, shipment_id: &str, milestone: &Milestone, status: EventStatus) -> Vec<&MilestoneEvent> {
        let lo = (shipment_id.to_string(), milestone.clone(), status, String::new());
        self.effective
            .range(lo..)
            .take_while(|((s, m, st, _), _)| s == shipment_id && m == milestone && *st == status)
            .map(|(_, &i)| &self.events[i])
            .collect()
    }

    /// The most recently emitted effective event of a status, across sources.
    pub fn latest(&self, shipment_id: &str, milestone: &Milestone, status: EventStatus) -> Option<&MilestoneEvent> {
        self.by_source(shipment_id, milestone, status).into_iter().max_by_key(|e| e.emission_seq)
    }

    pub fn actual(&self, shipment_id: &str, milestone: &Milestone) -> Option<&MilestoneEvent> {
        self.latest(shipment_id, milestone, EventStatus::Actual)
    }

    pub fn planned(&self, shipment_id: &str, milestone: &Milestone) -> Option<&MilestoneEvent> {
        self.latest(shipment_id, milestone, EventStatus::Planned)
    }

    /// The timeline as it stood once every emission with `emitted_at <= cutoff` had arrived.
    pub fn as_of(&self, cutoff: Hours) -> Timeline {
        let mut t = Timeline::new();
        for e in self.events.iter().filter(|e| e.emitted_at <= cutoff) {
            let seq = e.emission_seq;
            // replaying a consistent log cannot conflict
            let _ = t.record_event(e.clone());
            t.events.last_mut().expect("recorded").emission_seq = seq;
        }
        t.next_seq = self.next_seq;
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn ev(milestone: Milestone, status: EventStatus, source: &str, at: Hours, emitted: Hours) -> MilestoneEvent {
        MilestoneEvent {
            shipment_id: "S1".into(),
            milestone,
            status,
            source: source.into(),
            occurrence_time: at,
            emitted_at: emitted,
            emission_seq: 0,
        }
    }

    fn arr(p: &str) -> Milestone {
        Milestone::VesselArrival(p.into())
    }

    #[test]
    fn re_emission_supersedes() {
        let mut t = Timeline::new();
        t.record_event(ev(arr("SGSIN"), EventStatus::Estimated, "drayage", 100, 10)).unwrap();
        t.record_event(ev(arr("SGSIN"), EventStatus::Estimated, "drayage", 104, 12)).unwrap();
        let eff = t.latest("S1", &arr("SGSIN"), EventStatus::Estimated).unwrap();
        assert_eq!(eff.occurrence_time, 104);
        assert_eq!(t.all_events().len(), 2);
        assert_eq!(t.effective_events().count(), 1);
    }

    #[test]
    fn single_event_is_effective() {
        let mut t = Timeline::new();
        t.record_event(ev(arr("SGSIN"), EventStatus::Planned, "carrier", 240, 0)).unwrap();
        assert_eq!(t.planned("S1", &arr("SGSIN")).unwrap().occurrence_time, 240);
    }

    #[test]
    fn second_actual_conflicts_across_sources() {
        let mut t = Timeline::new();
        t.record_event(ev(arr("SGSIN"), EventStatus::Actual, "carrier", 240, 240)).unwrap();
        let err = t.record_event(ev(arr("SGSIN"), EventStatus::Actual, "port-authority", 241, 241)).unwrap_err();
        assert!(matches!(err, LogisticsError::DuplicateActual { .. }));
        assert_eq!(t.all_events().len(), 1);
    }

    #[test]
    fn as_of_cuts_by_emission_time() {
        let mut t = Timeline::new();
        t.record_event(ev(arr("SGSIN"), EventStatus::Estimated, "carrier", 100, 10)).unwrap();
        t.record_event(ev(arr("SGSIN"), EventStatus::Estimated, "carrier", 110, 20)).unwrap();
        let early = t.as_of(15);
        assert_eq!(early.latest("S1", &arr("SGSIN"), EventStatus::Estimated).unwrap().occurrence_time, 100);
        assert_eq!(t.as_of(20).latest("S1", &arr("SGSIN"), EventStatus::Estimated).unwrap().emission_seq, 1);
    }

    const SOURCES: [&str; 3] = ["carrier", "drayage", "port-authority"];
    const PORTS: [&str; 2] = ["SGSIN", "NLRTM"];

    proptest! {
        #[test]
        fn latest_wins_matches_brute_force(stream in prop::collection::vec((0usize..2, 0usize..2, 0usize..3, 0i64..500), 50)) {
            let mut t = Timeline::new();
            let mut emitted = Vec::new();
            for (i, &(p, st, src, at)) in stream.iter().enumerate() {
                let status = [EventStatus::Planned, EventStatus::Estimated][st];
                let e = ev(arr(PORTS[p]), status, SOURCES[src], at, i as i64);
                emitted.push(t.record_event(e).unwrap().clone());
            }
            // oracle: for every key, the emission with the largest sequence number
            let mut oracle: BTreeMap<EventKey, MilestoneEvent> = BTreeMap::new();
            for e in &emitted {
                let k = (e.shipment_id.clone(), e.milestone.clone(), e.status, e.source.clone());
                match oracle.get(&k) {
                    Some(prev) if prev.emission_seq > e.emission_seq => {}
                    _ => { oracle.insert(k, e.clone()); }
                }
            }
            let got: Vec<MilestoneEvent> = t.effective_events().cloned().collect();
            let want: Vec<MilestoneEvent> = oracle.into_values().collect();
            prop_assert_eq!(got, want);
        }
    }
}
