mod common;

use std::collections::BTreeSet;

use common::*;
use serde_json::json;
use skillnet_core::skill::{read_archive, Category};
use skillnet_registry::{ServiceConfig, TOKEN_HEADER};

fn seeded(dir: &std::path::Path) -> (TestServer, Vec<String>) {
    let server = TestServer::start(dir, no_sandbox());
    let ids = fixture_skills().iter().map(|pkg| admit(&server, pkg)).collect();
    (server, ids)
}

#[test]
fn search_modes_return_descending_schema_valid_results() {
    let dir = tempfile::tempdir().unwrap();
    let (server, ids) = seeded(dir.path());
    for mode in ["keyword", "vector", "hybrid"] {
        let reply = post_json(&server.url("/v1/search"), &json!({"query": "pdf extraction", "mode": mode, "top_k": 3}));
        let results = check_search(&reply);
        assert_eq!(results.len(), 3, "mode {mode}");
        assert!(ids.contains(&results[0]["skill_id"].as_str().unwrap().to_string()));
        let reply = post_json(&server.url("/v1/search"), &json!({"query": "extract tables from pdf", "mode": mode}));
        assert_eq!(check_search(&reply)[0]["name"], "pdf-table-extractor", "mode {mode}");
    }
}

#[test]
fn search_defaults_top_k_to_ten() {
    let dir = tempfile::tempdir().unwrap();
    let server = TestServer::start(dir.path(), no_sandbox());
    for i in 0..12 {
        admit(
            &server,
            &good_skill(&format!("report-tool-{i:02}"), &format!("Build report number {i} from tables"), Category::Business, &[]),
        );
    }
    let results = check_search(&post_json(&server.url("/v1/search"), &json!({"query": "report", "mode": "keyword"})));
    assert_eq!(results.len(), 10);
    let results = check_search(&post_json(&server.url("/v1/search"), &json!({"query": "report", "mode": "hybrid", "top_k": 100})));
    assert_eq!(results.len(), 12);
}

#[test]
fn search_filters_are_sound() {
    let dir = tempfile::tempdir().unwrap();
    let (server, _) = seeded(dir.path());
    let url = server.url("/v1/search");
    for mode in ["keyword", "vector", "hybrid"] {
        let results = check_search(&post_json(
            &url,
            &json!({"query": "documents images tests", "mode": mode, "category": "Productivity", "top_k": 100}),
        ));
        assert!(!results.is_empty());
        assert!(results.iter().all(|r| r["category"] == "Productivity"), "{results:?}");

        let results = check_search(&post_json(
            &url,
            &json!({"query": "pdf documents", "mode": mode, "tags": ["pdf", "tables"], "top_k": 100}),
        ));
        assert_eq!(results.len(), 1, "{results:?}");
        assert_eq!(results[0]["name"], "pdf-table-extractor");

        let results = check_search(&post_json(
            &url,
            &json!({"query": "pdf", "mode": mode, "category": "Security", "tags": ["pdf"]}),
        ));
        assert!(results.is_empty());
    }
}

#[test]
fn search_request_errors() {
    let dir = tempfile::tempdir().unwrap();
    let (server, _) = seeded(dir.path());
    let url = server.url("/v1/search");
    check_error(&post_raw(&url, "application/json", b"{not json"), 400, "InvalidRequest");
    check_error(&post_json(&url, &json!({"mode": "keyword"})), 400, "InvalidRequest");
    check_error(&post_json(&url, &json!({"query": "pdf"})), 400, "InvalidMode");
    check_error(&post_json(&url, &json!({"query": "pdf", "mode": "fuzzy"})), 400, "InvalidMode");
    check_error(&post_json(&url, &json!({"query": "   ", "mode": "keyword"})), 400, "EmptyQuery");
    check_error(&post_json(&url, &json!({"query": "? ! ...", "mode": "hybrid"})), 400, "EmptyQuery");
    check_error(&post_json(&url, &json!({"query": "pdf", "mode": "keyword", "top_k": 0})), 422, "InvalidTopK");
    check_error(&post_json(&url, &json!({"query": "pdf", "mode": "keyword", "top_k": 101})), 422, "InvalidTopK");
    check_error(&post_json(&url, &json!({"query": "pdf", "mode": "keyword", "top_k": -3})), 422, "InvalidTopK");
    check_error(&post_json(&url, &json!({"query": "pdf", "mode": "keyword", "category": "Cooking"})), 400, "InvalidCategory");
    check_error(&post_json(&url, &json!({"query": "pdf", "mode": "keyword", "tags": [""]})), 400, "InvalidTag");
}

#[test]
fn configured_top_k_bound_is_enforced() {
    let dir = tempfile::tempdir().unwrap();
    let server = TestServer::start_with(ServiceConfig {
        root: dir.path().to_path_buf(),
        max_top_k: 5,
        sandbox: no_sandbox(),
        ..ServiceConfig::default()
    });
    let url = server.url("/v1/search");
    check_search(&post_json(&url, &json!({"query": "pdf", "mode": "keyword", "top_k": 5})));
    check_error(&post_json(&url, &json!({"query": "pdf", "mode": "keyword", "top_k": 6})), 422, "InvalidTopK");
}

#[test]
fn skill_metadata_and_unknown_ids() {
    let dir = tempfile::tempdir().unwrap();
    let (server, ids) = seeded(dir.path());
    let reply = get(&server.url(&format!("/v1/skills/{}", ids[0])));
    assert_eq!(reply.status, 200);
    let entry = reply.json();
    check_entry(&entry);
    assert_eq!(entry["skill_id"], ids[0].as_str());
    assert_eq!(entry["name"], "pdf-table-extractor");
    assert_eq!(entry["category"], "Productivity");

    check_error(&get(&server.url("/v1/skills/no-such-skill")), 404, "UnknownSkill");
    check_error(&get(&server.url("/v1/skills/no-such-skill/archive")), 404, "UnknownSkill");
    check_error(&get(&server.url("/v1/skills/no-such-skill/relations")), 404, "UnknownSkill");
}

#[test]
fn archives_are_stable_and_match_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let (server, ids) = seeded(dir.path());
    for id in &ids {
        let first = get(&server.url(&format!("/v1/skills/{id}/archive")));
        let second = get(&server.url(&format!("/v1/skills/{id}/archive")));
        assert_eq!(first.status, 200);
        assert_eq!(first.content_type.as_deref(), Some("application/x-tar"));
        assert_eq!(first.bytes, second.bytes, "archive for {id} changed between requests");
        let pkg = read_archive(&first.bytes).unwrap();
        let entry = get(&server.url(&format!("/v1/skills/{id}"))).json();
        assert_eq!(serde_json::to_value(pkg.fingerprint()).unwrap(), entry["fingerprint"]);
    }
}

#[test]
fn contributions_report_admission_duplicates_and_rejections() {
    let dir = tempfile::tempdir().unwrap();
    let server = TestServer::start(dir.path(), no_sandbox());
    let url = server.url("/v1/skills");
    let pkg = good_skill("csv-cleaner", "Clean malformed rows out of CSV exports", Category::Productivity, &["csv"]);
    let id = admit(&server, &pkg);

    let dup = check_error(&post_raw(&url, "application/x-tar", &archive_of(&pkg)), 409, "Duplicate");
    assert_eq!(dup["details"]["existing_id"], id.as_str());

    let rejected = check_error(&post_raw(&url, "application/x-tar", &archive_of(&unsafe_skill())), 422, "Rejected");
    let report = &rejected["details"]["report"];
    assert_eq!(report["input_count"], 1);
    assert_eq!(report["rejected"].as_array().unwrap().len(), 1);
    assert!(rejected["message"].as_str().unwrap().contains("Safety"), "{rejected}");

    let filtered = check_error(
        &post_raw(&url, "application/x-tar", &archive_of(&skill("tiny", "Too short to be useful here", Category::Other, &[], "1. Go.\n"))),
        422,
        "Rejected",
    );
    assert_eq!(filtered["details"]["report"]["filtered_out"].as_array().unwrap().len(), 1);

    check_error(&post_raw(&url, "application/x-tar", b"definitely not a tar archive"), 400, "MalformedArchive");
    check_error(&post_raw(&url, "application/x-tar", b""), 400, "MalformedArchive");

    let stats = get(&server.url("/v1/stats")).json();
    assert_eq!(stats["total_skills"], 1);
}

#[test]
fn oversized_uploads_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    let server = TestServer::start_with(ServiceConfig {
        root: dir.path().to_path_buf(),
        max_upload_bytes: 1024,
        sandbox: no_sandbox(),
        ..ServiceConfig::default()
    });
    let big = vec![0u8; 4096];
    check_error(&post_raw(&server.url("/v1/skills"), "application/x-tar", &big), 413, "PayloadTooLarge");
}

#[test]
fn relations_are_incident_edges() {
    let dir = tempfile::tempdir().unwrap();
    let (server, ids) = seeded(dir.path());
    let reply = get(&server.url(&format!("/v1/skills/{}/relations", ids[0])));
    assert_eq!(reply.status, 200);
    let v = reply.json();
    check_relations(&v, &ids[0]);
    let rels: BTreeSet<&str> = v["relations"].as_array().unwrap().iter().map(|e| e["rel"].as_str().unwrap()).collect();
    assert!(rels.contains("InCategory") || rels.contains("in_category"), "{rels:?}");
}

#[test]
fn stats_match_a_recount_of_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let (server, ids) = seeded(dir.path());
    let stats = get(&server.url("/v1/stats")).json();
    check_stats(&stats);
    assert_eq!(stats["total_skills"].as_u64(), Some(ids.len() as u64));
    let mut per_category = std::collections::BTreeMap::<String, u64>::new();
    let mut per_grade = std::collections::BTreeMap::<(String, String), u64>::new();
    for id in &ids {
        let entry = get(&server.url(&format!("/v1/skills/{id}"))).json();
        *per_category.entry(entry["category"].as_str().unwrap().to_string()).or_default() += 1;
        for (dim, g) in entry["grades"].as_object().unwrap() {
            *per_grade.entry((dim.clone(), g["level"].as_str().unwrap().to_string())).or_default() += 1;
        }
    }
    for c in CATEGORIES {
        assert_eq!(stats["per_category"][c].as_u64().unwrap(), per_category.get(c).copied().unwrap_or(0), "{c}");
    }
    for (dim, counts) in stats["per_dimension"].as_object().unwrap() {
        for (grade, n) in counts.as_object().unwrap() {
            let expected = per_grade.get(&(dim.clone(), grade.clone())).copied().unwrap_or(0);
            assert_eq!(n.as_u64().unwrap(), expected, "{dim}/{grade}");
        }
    }
}

#[test]
fn unknown_routes_and_methods() {
    let dir = tempfile::tempdir().unwrap();
    let server = TestServer::start(dir.path(), no_sandbox());
    check_error(&get(&server.url("/v2/anything")), 404, "NotFound");
    check_error(&get(&server.url("/v1/search")), 405, "MethodNotAllowed");
    check_error(&delete(&server.url("/v1/stats")), 405, "MethodNotAllowed");
}

#[test]
fn shared_token_guards_every_route_when_configured() {
    let dir = tempfile::tempdir().unwrap();
    let server = TestServer::start_with(ServiceConfig {
        root: dir.path().to_path_buf(),
        auth_token: Some("s3cret".into()),
        sandbox: no_sandbox(),
        ..ServiceConfig::default()
    });
    let url = server.url("/v1/stats");
    check_error(&get(&url), 401, "Unauthorized");
    check_error(&get_with(&url, (TOKEN_HEADER, "wrong")), 401, "Unauthorized");
    check_error(&get(&server.url("/v1/skills/x")), 401, "Unauthorized");
    assert_eq!(get_with(&url, (TOKEN_HEADER, "s3cret")).status, 200);
    assert_eq!(get_with(&url, ("authorization", "Bearer s3cret")).status, 200);
}

#[test]
fn token_is_not_required_by_default() {
    let dir = tempfile::tempdir().unwrap();
    let server = TestServer::start(dir.path(), no_sandbox());
    assert_eq!(get(&server.url("/v1/stats")).status, 200);
}

#[test]
fn concurrent_contributions_and_reads_stay_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let (server, seeded_ids) = seeded(dir.path());
    let base = server.base.clone();
    let writers: Vec<_> = (0..8)
        .map(|i| {
            let base = base.clone();
            std::thread::spawn(move || {
                let pkg = good_skill(
                    &format!("parallel-skill-{i}"),
                    &format!("Handle parallel workload number {i} safely"),
                    Category::Development,
                    &["parallel"],
                );
                post_raw(&format!("{base}/v1/skills"), "application/x-tar", &archive_of(&pkg)).status
            })
        })
        .collect();
    let readers: Vec<_> = (0..4)
        .map(|_| {
            let base = base.clone();
            std::thread::spawn(move || {
                for _ in 0..10 {
                    let reply = post_json(&format!("{base}/v1/search"), &json!({"query": "parallel workload pdf", "mode": "hybrid"}));
                    check_search(&reply);
                    check_stats(&get(&format!("{base}/v1/stats")).json());
                }
            })
        })
        .collect();
    for w in writers {
        assert_eq!(w.join().unwrap(), 201);
    }
    for r in readers {
        r.join().unwrap();
    }
    let stats = get(&server.url("/v1/stats")).json();
    assert_eq!(stats["total_skills"].as_u64(), Some(seeded_ids.len() as u64 + 8));
    assert!(server.state.repo.store().validate().unwrap().is_empty());
}

#[test]
fn racing_identical_uploads_admit_exactly_once() {
    let dir = tempfile::tempdir().unwrap();
    let server = TestServer::start(dir.path(), no_sandbox());
    let archive = archive_of(&good_skill("race-winner", "Win a race between identical uploads", Category::Testing, &[]));
    let handles: Vec<_> = (0..6)
        .map(|_| {
            let url = server.url("/v1/skills");
            let archive = archive.clone();
            std::thread::spawn(move || post_raw(&url, "application/x-tar", &archive).status)
        })
        .collect();
    let mut statuses: Vec<u16> = handles.into_iter().map(|h| h.join().unwrap()).collect();
    statuses.sort_unstable();
    assert_eq!(statuses, vec![201, 409, 409, 409, 409, 409]);
    assert_eq!(get(&server.url("/v1/stats")).json()["total_skills"], 1);
}

#[test]
fn interrupted_writes_are_cleaned_up_on_restart() {
    let dir = tempfile::tempdir().unwrap();
    let (server, ids) = seeded(dir.path());
    let before = get(&server.url("/v1/stats")).json();
    drop(server);

    let skills = dir.path().join("skills");
    std::fs::create_dir_all(skills.join(".staging-half-written")).unwrap();
    std::fs::write(skills.join(".staging-half-written").join("SKILL.md"), "partial").unwrap();
    std::fs::create_dir_all(skills.join("orphan-skill")).unwrap();
    std::fs::write(dir.path().join("manifest.json.tmp"), "{ truncated").unwrap();

    let server = TestServer::start(dir.path(), no_sandbox());
    assert_eq!(get(&server.url("/v1/stats")).json(), before);
    check_error(&get(&server.url("/v1/skills/orphan-skill")), 404, "UnknownSkill");
    assert!(!skills.join(".staging-half-written").exists());
    assert!(!skills.join("orphan-skill").exists());
    assert!(!dir.path().join("manifest.json.tmp").exists());
    assert!(server.state.repo.store().validate().unwrap().is_empty());
    for id in &ids {
        assert_eq!(get(&server.url(&format!("/v1/skills/{id}/archive"))).status, 200);
    }
}
