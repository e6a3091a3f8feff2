use std::collections::HashMap;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use percent_encoding::{utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};

use super::{Did, DidDocument, DidError, DidMethod};

const FILENAME_SET: &AsciiSet = &NON_ALPHANUMERIC.remove(b'.').remove(b'-').remove(b'_');

/// Maps a `did:web` method-specific identifier to raw document bytes.
pub trait WebSource: Send + Sync {
    fn fetch(&self, identifier: &str) -> Result<Vec<u8>, DidError>;
}

/// One JSON file per identity: `<dir>/<percent-encoded identifier>.json`.
#[derive(Debug, Clone)]
pub struct DirectorySource {
    dir: PathBuf,
}

impl DirectorySource {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn file_name(identifier: &str) -> String {
        format!("{}.json", utf8_percent_encode(identifier, FILENAME_SET))
    }

    pub fn path_for(&self, identifier: &str) -> PathBuf {
        self.dir.join(Self::file_name(identifier))
    }

    /// Writes `doc` where [`fetch`](WebSource::fetch) will find it.
    pub fn store(&self, doc: &DidDocument) -> io::Result<PathBuf> {
        std::fs::create_dir_all(&self.dir)?;
        let path = self.path_for(doc.id.identifier());
        crate::write_atomic(&path, doc.to_json().as_bytes())?;
        Ok(path)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

impl WebSource for DirectorySource {
    fn fetch(&self, identifier: &str) -> Result<Vec<u8>, DidError> {
        let path = self.path_for(identifier);
        std::fs::read(&path).map_err(|e| match e.kind() {
            io::ErrorKind::NotFound => DidError::NotFound(format!("did:web:{identifier}")),
            _ => DidError::Source(format!("{}: {e}", path.display())),
        })
    }
}

/// In-memory source, mostly for tests.
#[derive(Debug, Default)]
pub struct MemorySource {
    docs: RwLock<HashMap<String, Vec<u8>>>,
}

impl MemorySource {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&self, doc: &DidDocument) {
        self.insert_raw(doc.id.identifier(), doc.to_json().into_bytes());
    }

    pub fn insert_raw(&self, identifier: &str, bytes: Vec<u8>) {
        self.docs
            .write()
            .expect("lock")
            .insert(identifier.to_string(), bytes);
    }
}

impl WebSource for MemorySource {
    fn fetch(&self, identifier: &str) -> Result<Vec<u8>, DidError> {
        self.docs
            .read()
            .expect("lock")
            .get(identifier)
            .cloned()
            .ok_or_else(|| DidError::NotFound(format!("did:web:{identifier}")))
    }
}

impl<T: WebSource + ?Sized> WebSource for Arc<T> {
    fn fetch(&self, identifier: &str) -> Result<Vec<u8>, DidError> {
        (**self).fetch(identifier)
    }
}

/// Fetches `https://<host>/.well-known/did.json` (or `/<path>/did.json`).
#[cfg(feature = "http")]
#[derive(Debug, Clone)]
pub struct HttpSource {
    scheme: String,
}

#[cfg(feature = "http")]
impl Default for HttpSource {
    fn default() -> Self {
        Self {
            scheme: "https".into(),
        }
    }
}

#[cfg(feature = "http")]
impl HttpSource {
    pub fn new() -> Self {
        Self::default()
    }

    /// Plain `http` is only meant for local testing.
    pub fn with_scheme(scheme: &str) -> Self {
        Self {
            scheme: scheme.into(),
        }
    }

    pub fn url_for(&self, identifier: &str) -> String {
        let mut parts = identifier.split(':');
        let host = parts
            .next()
            .unwrap_or_default()
            .replace("%3A", ":")
            .replace("%3a", ":");
        let path: Vec<&str> = parts.collect();
        if path.is_empty() {
            format!("{}://{host}/.well-known/did.json", self.scheme)
        } else {
            format!("{}://{host}/{}/did.json", self.scheme, path.join("/"))
        }
    }
}

#[cfg(feature = "http")]
impl WebSource for HttpSource {
    fn fetch(&self, identifier: &str) -> Result<Vec<u8>, DidError> {
        let url = self.url_for(identifier);
        match ureq::get(&url).call() {
            Ok(mut resp) => resp
                .body_mut()
                .read_to_vec()
                .map_err(|e| DidError::Source(format!("{url}: {e}"))),
            Err(ureq::Error::StatusCode(404)) => {
                Err(DidError::NotFound(format!("did:web:{identifier}")))
            }
            Err(e) => Err(DidError::Source(format!("{url}: {e}"))),
        }
    }
}

/// Resolves `did:key` locally and `did:web` through the configured source.
#[derive(Clone)]
pub struct ResolverRegistry {
    web_source: Arc<dyn WebSource>,
}

impl ResolverRegistry {
    pub fn new(web_source: impl WebSource + 'static) -> Self {
        Self {
            web_source: Arc::new(web_source),
        }
    }

    pub fn directory(dir: impl Into<PathBuf>) -> Self {
        Self::new(DirectorySource::new(dir))
    }

    pub fn resolve(&self, did: &Did) -> Result<DidDocument, DidError> {
        match did.method() {
            DidMethod::Key => DidDocument::for_did_key(did),
            DidMethod::Web => {
                let bytes = self.web_source.fetch(did.identifier())?;
                let doc = DidDocument::from_json(&bytes)?;
                if &doc.id != did {
                    return Err(DidError::MalformedDocument(format!(
                        "document id {} does not match {did}",
                        doc.id
                    )));
                }
                Ok(doc)
            }
        }
    }
}

impl std::fmt::Debug for ResolverRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ResolverRegistry").finish_non_exhaustive()
    }
}
