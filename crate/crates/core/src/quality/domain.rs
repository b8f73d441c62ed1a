use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use url::{Host, Url};

use crate::error::{Error, Result};

/// Minimum number of URLs a seed list must hold on a domain for that domain
/// to be added to the expansion set.
pub const DEFAULT_MIN_SEED_URLS: usize = 10;
/// Domain aggregation defaults: at least 10 pages scoring 2 or higher.
pub const DEFAULT_MIN_PAGES: usize = 10;
pub const DEFAULT_MIN_PAGE_SCORE: u8 = 2;

/// Registrable domain (public suffix plus one label) of a URL.
///
/// Uses the public-suffix snapshot compiled into the `psl` crate. IP hosts and
/// hosts that are themselves a public suffix have no registrable domain.
pub fn registrable_domain(url: &str) -> Result<String> {
    let parsed = Url::parse(url).map_err(|e| Error::input(format!("{url:?}: {e}")))?;
    let host = match parsed.host() {
        Some(Host::Domain(h)) => h.trim_end_matches('.').to_string(),
        Some(_) => return Err(Error::input(format!("{url:?}: IP hosts have no registrable domain"))),
        None => return Err(Error::input(format!("{url:?}: no host"))),
    };
    psl::domain_str(&host)
        .map(str::to_owned)
        .ok_or_else(|| Error::input(format!("{url:?}: no registrable domain")))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoredPage {
    pub url: String,
    pub domain: String,
    pub score: u8,
}

impl ScoredPage {
    pub fn new(url: impl Into<String>, score: u8) -> Result<Self> {
        let url = url.into();
        if score > 5 {
            return Err(Error::input(format!("page score {score} outside 0..=5")));
        }
        let domain = registrable_domain(&url)?;
        Ok(ScoredPage { url, domain, score })
    }
}

/// Domains with at least `min_pages` pages scoring `>= min_score`, sorted.
pub fn domain_select(pages: &[ScoredPage], min_pages: usize, min_score: u8) -> Result<Vec<String>> {
    if min_pages == 0 {
        return Err(Error::config("min_pages must be at least 1"));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for page in pages.iter().filter(|p| p.score >= min_score) {
        *counts.entry(page.domain.as_str()).or_default() += 1;
    }
    let mut allow: Vec<String> = counts
        .into_iter()
        .filter(|(_, c)| *c >= min_pages)
        .map(|(d, _)| d.to_owned())
        .collect();
    allow.sort();
    Ok(allow)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpansionResult {
    /// Selected URLs, deduplicated, in list order then in-list order.
    pub selected: Vec<String>,
    /// Per named list, how many selected URLs it contributed first.
    pub provenance: BTreeMap<String, usize>,
    /// Allowlist plus domains added through the seed-list rule, sorted.
    pub domains: Vec<String>,
    pub unparseable: usize,
}

/// Expands a domain allowlist with seed lists and selects matching URLs.
///
/// The domain set is the allowlist plus every domain that holds at least
/// `min_seed_urls` URLs in some single named list. A URL from any list is
/// selected when its domain is in that set. Duplicates are credited to the
/// first list (by list order) that contains them.
pub fn expand_urls(
    allowlist: &[String],
    seed_lists: &[(String, Vec<String>)],
    min_seed_urls: usize,
) -> ExpansionResult {
    let mut result = ExpansionResult::default();
    let mut parsed: Vec<Vec<(&str, String)>> = Vec::with_capacity(seed_lists.len());
    for (_, urls) in seed_lists {
        let mut list = Vec::with_capacity(urls.len());
        for url in urls {
            match registrable_domain(url) {
                Ok(d) => list.push((url.as_str(), d)),
                Err(_) => result.unparseable += 1,
            }
        }
        parsed.push(list);
    }

    let mut domains: BTreeSet<String> = allowlist.iter().cloned().collect();
    for list in &parsed {
        let mut per_domain: HashMap<&str, usize> = HashMap::new();
        for (_, d) in list {
            *per_domain.entry(d.as_str()).or_default() += 1;
        }
        domains.extend(
            per_domain
                .into_iter()
                .filter(|(_, c)| *c >= min_seed_urls)
                .map(|(d, _)| d.to_owned()),
        );
    }

    let mut seen: HashSet<&str> = HashSet::new();
    for ((name, _), list) in seed_lists.iter().zip(&parsed) {
        let count = result.provenance.entry(name.clone()).or_default();
        for (url, d) in list {
            if domains.contains(d) && seen.insert(url) {
                result.selected.push((*url).to_owned());
                *count += 1;
            }
        }
    }
    result.domains = domains.into_iter().collect();
    result
}
