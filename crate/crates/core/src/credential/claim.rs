use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::CredentialError;
use crate::did::Did;

/// Topic sets of one per-broker claim, serialized as `{"sub": [..], "pub": [..]}`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClaimTopics {
    #[serde(rename = "sub", default, skip_serializing_if = "Vec::is_empty")]
    pub subscribe: Vec<String>,
    #[serde(rename = "pub", default, skip_serializing_if = "Vec::is_empty")]
    pub publish: Vec<String>,
}

impl ClaimTopics {
    pub fn validate(&self) -> Result<(), CredentialError> {
        if self.subscribe.is_empty() && self.publish.is_empty() {
            return Err(CredentialError::InvalidClaim(
                "claim grants no topics".into(),
            ));
        }
        if self
            .subscribe
            .iter()
            .chain(&self.publish)
            .any(String::is_empty)
        {
            return Err(CredentialError::InvalidClaim("empty topic string".into()));
        }
        Ok(())
    }
}

/// Publish/subscribe rights at one broker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorizationClaim {
    pub broker: Did,
    #[serde(flatten)]
    pub topics: ClaimTopics,
}

impl AuthorizationClaim {
    pub fn new<S: Into<String>>(
        broker: Did,
        subscribe: impl IntoIterator<Item = S>,
        publish: impl IntoIterator<Item = S>,
    ) -> Self {
        Self {
            broker,
            topics: ClaimTopics {
                subscribe: subscribe.into_iter().map(Into::into).collect(),
                publish: publish.into_iter().map(Into::into).collect(),
            },
        }
    }

    /// Parses a claims file: a JSON array of `{"broker", "sub", "pub"}` objects.
    pub fn list_from_json(bytes: &[u8]) -> Result<Vec<Self>, CredentialError> {
        let claims: Vec<Self> = serde_json::from_slice(bytes)
            .map_err(|e| CredentialError::InvalidClaim(e.to_string()))?;
        for c in &claims {
            c.topics.validate()?;
        }
        Ok(claims)
    }
}

/// Topic sets a broker stores after verifying a presentation (`A_Pub`, `A_Sub`).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct AuthorizationGrant {
    pub publish_topics: BTreeSet<String>,
    pub subscribe_topics: BTreeSet<String>,
}

impl AuthorizationGrant {
    pub fn may_publish(&self, topic: &str) -> bool {
        self.publish_topics.contains(topic)
    }

    pub fn may_subscribe(&self, topic: &str) -> bool {
        self.subscribe_topics.contains(topic)
    }

    pub fn absorb(&mut self, topics: &ClaimTopics) {
        self.publish_topics.extend(topics.publish.iter().cloned());
        self.subscribe_topics
            .extend(topics.subscribe.iter().cloned());
    }

    pub fn is_empty(&self) -> bool {
        self.publish_topics.is_empty() && self.subscribe_topics.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn claims_file_format() {
        let json = br#"[
            {"broker": "did:web:broker1.com", "sub": ["t1"], "pub": ["t2"]},
            {"broker": "did:web:broker2.com", "pub": ["t3", "t4"]}
        ]"#;
        let claims = AuthorizationClaim::list_from_json(json).unwrap();
        assert_eq!(claims.len(), 2);
        assert_eq!(claims[1].topics.publish, vec!["t3", "t4"]);
        assert!(claims[1].topics.subscribe.is_empty());
    }

    #[test]
    fn invalid_claims() {
        let none = br#"[{"broker": "did:web:b.com"}]"#;
        assert!(AuthorizationClaim::list_from_json(none).is_err());
        let empty_topic = br#"[{"broker": "did:web:b.com", "pub": [""]}]"#;
        assert!(AuthorizationClaim::list_from_json(empty_topic).is_err());
        let bad_did = br#"[{"broker": "broker.com", "pub": ["t"]}]"#;
        assert!(AuthorizationClaim::list_from_json(bad_did).is_err());
    }

    #[test]
    fn value_serialization_order() {
        let topics = ClaimTopics {
            subscribe: vec!["t1".into()],
            publish: vec!["t2".into()],
        };
        assert_eq!(
            serde_json::to_string(&topics).unwrap(),
            r#"{"sub":["t1"],"pub":["t2"]}"#
        );
        let only_pub = ClaimTopics {
            subscribe: vec![],
            publish: vec!["t3".into(), "t4".into()],
        };
        assert_eq!(
            serde_json::to_string(&only_pub).unwrap(),
            r#"{"pub":["t3","t4"]}"#
        );
    }

    #[test]
    fn grant_union() {
        let mut g = AuthorizationGrant::default();
        g.absorb(&ClaimTopics {
            subscribe: vec!["a".into()],
            publish: vec![],
        });
        g.absorb(&ClaimTopics {
            subscribe: vec!["a".into(), "b".into()],
            publish: vec!["c".into()],
        });
        assert_eq!(g.subscribe_topics.len(), 2);
        assert!(g.may_publish("c"));
        assert!(!g.may_publish("a"));
    }
}
