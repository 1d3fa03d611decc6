use hearth_demo::{arbitrate, difficulty_trace, priorities_at, priority_surface};
use serde_json::{json, Value};

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

#[test]
fn surface_spans_the_slider_square() {
    let v = parse(priority_surface(4));
    assert_eq!(v["axis"], json!([0.0, 0.25, 0.5, 0.75, 1.0]));
    let agents = v["agents"].as_object().unwrap();
    assert_eq!(agents.len(), 10);
    let sec = &agents["security-agent-001"];
    assert_eq!(sec[2][2], 0.8);
    assert_eq!(sec[0][0], 0.6);
    assert_eq!(sec[4][4], 1.0);
    assert_eq!(agents["climate-agent-001"][4][0], 0.6);
    for row in agents["safety-agent-001"].as_array().unwrap() {
        assert!(row.as_array().unwrap().iter().all(|p| *p == 1.0));
    }
    assert!(parse(priority_surface(0))["error"].is_string());
}

#[test]
fn center_priorities() {
    let v = parse(priorities_at(0.5, 0.5));
    assert_eq!(v["energy-agent-001"], 0.6);
    assert_eq!(v["privacy-agent-001"], 0.7);
}

#[test]
fn trace_follows_counts() {
    let v = parse(difficulty_trace("C", r#"{"counts": [0, 0, 0, 20, 20, 20, 20, 20]}"#));
    let d: Vec<u64> = v["blocks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|b| b["difficulty"].as_u64().unwrap())
        .collect();
    assert_eq!(d, [2, 3, 4, 4, 3, 2, 1, 1]);

    let v = parse(difficulty_trace("e", r#"{"seed": 42}"#));
    let blocks = v["blocks"].as_array().unwrap();
    assert_eq!(blocks.len(), 20);
    assert_eq!(blocks[0]["phase"], "IDLE");
    assert!(blocks
        .iter()
        .all(|b| (2..=4).contains(&b["difficulty"].as_u64().unwrap())));

    assert!(parse(difficulty_trace("Z", "{}"))["error"].is_string());
    assert!(parse(difficulty_trace("A", "{}"))["error"].is_string());
}

#[test]
fn arbitrate_levels() {
    let two = |a: (&str, u64, u64, u64), b: (&str, u64, u64, u64)| {
        json!({"competitors": [
            {"agent_id": a.0, "action": "set", "total": a.1, "accepted": a.2, "conflicts": a.3},
            {"agent_id": b.0, "action": "off", "total": b.1, "accepted": b.2, "conflicts": b.3},
        ]})
        .to_string()
    };
    let v = parse(arbitrate(&two(
        ("energy-agent-001", 10, 9, 2),
        ("climate-agent-001", 10, 7, 0),
    )));
    assert_eq!(v["record"]["resolution_level"], "L3");
    assert_eq!(v["record"]["winner"], "energy-agent-001");
    assert!((v["scores"]["energy-agent-001"].as_f64().unwrap() - 0.726).abs() < 1e-9);

    let v = parse(arbitrate(&two(
        ("energy-agent-001", 3, 3, 0),
        ("security-agent-001", 50, 50, 0),
    )));
    assert_eq!(v["record"]["resolution_level"], "L4");
    assert_eq!(v["record"]["winner"], "security-agent-001");
    assert!(v["scores"]["energy-agent-001"].is_null());

    let v = parse(arbitrate(&two(
        ("climate-agent-001", 0, 0, 0),
        ("safety-agent-001", 0, 0, 0),
    )));
    assert_eq!(v["record"]["resolution_level"], "L1");

    // Sliders move the cold-start outcome.
    let req = json!({
        "sliders": {"comfort_vs_energy": 1.0, "security_vs_privacy": 0.5},
        "competitors": [
            {"agent_id": "energy-agent-001", "action": "eco"},
            {"agent_id": "climate-agent-001", "action": "heat"},
        ],
    });
    let v = parse(arbitrate(&req.to_string()));
    assert_eq!(v["record"]["winner"], "climate-agent-001");
    assert_eq!(v["priorities"]["climate-agent-001"], 0.6);

    assert!(parse(arbitrate("nope"))["error"].is_string());
    assert!(parse(arbitrate(r#"{"competitors": []}"#))["error"].is_string());
    assert!(parse(arbitrate(&two(("x", 5, 9, 0), ("y", 0, 0, 0))))["error"].is_string());
}
