use std::collections::{BTreeMap, BTreeSet};

/// Topic → subscribed session ids (ephemeral DID strings).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TopicTable {
    routes: BTreeMap<String, BTreeSet<String>>,
}

impl TopicTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn subscribe(&mut self, session: &str, topic: &str) {
        self.routes
            .entry(topic.to_string())
            .or_default()
            .insert(session.to_string());
    }

    pub fn subscribers(&self, topic: &str) -> Vec<String> {
        self.routes
            .get(topic)
            .map(|s| s.iter().cloned().collect())
            .unwrap_or_default()
    }

    pub fn is_subscribed(&self, session: &str, topic: &str) -> bool {
        self.routes.get(topic).is_some_and(|s| s.contains(session))
    }

    /// Drops the session from every topic.
    pub fn remove_session(&mut self, session: &str) {
        self.routes.retain(|_, subs| {
            subs.remove(session);
            !subs.is_empty()
        });
    }

    pub fn topic_count(&self) -> usize {
        self.routes.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subscribe_and_evict() {
        let mut t = TopicTable::new();
        t.subscribe("s1", "t1");
        t.subscribe("s1", "t1");
        t.subscribe("s2", "t1");
        t.subscribe("s1", "t2");
        assert_eq!(t.subscribers("t1"), ["s1", "s2"]);
        assert!(t.is_subscribed("s1", "t2"));
        t.remove_session("s1");
        assert_eq!(t.subscribers("t1"), ["s2"]);
        assert!(t.subscribers("t2").is_empty());
        assert_eq!(t.topic_count(), 1);
    }
}
