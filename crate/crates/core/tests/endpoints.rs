mod common;

use std::time::Duration;

use agentchess_core::agent::{ChatMessage, DialogAgent, ModelErrorKind};
use agentchess_core::match_runner::{play_game, GameConfig, SubjectResult};
use agentchess_core::players::llm::{ChatClient, LlmEndpointConfig, ReasoningEffort};
use agentchess_core::players::moa::{MoaConfig, MoaPlayer, NO_RESPONSE, SYNTHESIZER_PROMPT};
use agentchess_core::players::PlayerSpec;
use common::{completion, last_user_message, serve, Reply};
use serde_json::json;

#[test]
fn request_shape_and_reply() {
    let server = serve(|body| Reply::Json(completion(&format!("echo: {}", last_user_message(body)))));
    std::env::set_var("AGENTCHESS_TEST_TOKEN_A", "sekrit");
    let mut cfg = LlmEndpointConfig::new(&server.url, "test-model");
    cfg.api_key_env = Some("AGENTCHESS_TEST_TOKEN_A".into());
    cfg.reasoning_effort = Some(ReasoningEffort::Medium);
    let mut client = ChatClient::new(cfg).unwrap();
    let reply = client.reply(&[ChatMessage::user("hello")]).unwrap();
    assert_eq!(reply.content, "echo: hello");
    let usage = reply.usage.unwrap();
    assert_eq!((usage.prompt_tokens, usage.completion_tokens, usage.reasoning_tokens), (Some(11), Some(7), Some(3)));

    let reqs = server.requests();
    assert_eq!(reqs.len(), 1);
    assert_eq!(reqs[0].path, "/v1/chat/completions");
    assert_eq!(reqs[0].authorization.as_deref(), Some("Bearer sekrit"));
    let b = &reqs[0].body;
    assert_eq!(b["model"], "test-model");
    assert_eq!(b["temperature"], 0.3);
    assert_eq!(b["top_p"], 1.0);
    assert_eq!(b["reasoning_effort"], "medium");
    assert_eq!(b["messages"], json!([{ "role": "user", "content": "hello" }]));
}

#[test]
fn missing_token_variable_is_a_config_error() {
    let mut cfg = LlmEndpointConfig::new("http://127.0.0.1:9/v1", "m");
    cfg.api_key_env = Some("AGENTCHESS_TEST_TOKEN_UNSET".into());
    assert_eq!(ChatClient::new(cfg).err().unwrap().kind, ModelErrorKind::Config);
}

#[test]
fn slow_endpoint_times_out() {
    let server = serve(|_| Reply::Delayed(Duration::from_secs(3), completion("late")));
    let mut cfg = LlmEndpointConfig::new(&server.url, "m");
    cfg.timeout_secs = 0.3;
    let err = ChatClient::new(cfg).unwrap().reply(&[ChatMessage::user("x")]).unwrap_err();
    assert_eq!(err.kind, ModelErrorKind::Timeout);
    assert_eq!(server.requests().len(), 1, "no retries by default");
}

#[test]
fn server_error_is_transport_and_retried_when_asked() {
    let server = serve(|_| Reply::Status(500, "{\"error\":\"boom\"}".into()));
    let mut cfg = LlmEndpointConfig::new(&server.url, "m");
    cfg.max_retries = 2;
    let err = ChatClient::new(cfg).unwrap().reply(&[ChatMessage::user("x")]).unwrap_err();
    assert_eq!(err.kind, ModelErrorKind::Transport);
    assert!(err.message.contains("HTTP 500"), "{}", err.message);
    assert_eq!(server.requests().len(), 3);
}

#[test]
fn malformed_body() {
    let server = serve(|_| Reply::Json(json!({ "nothing": true })));
    let err = ChatClient::new(LlmEndpointConfig::new(&server.url, "m")).unwrap().reply(&[]).unwrap_err();
    assert_eq!(err.kind, ModelErrorKind::Malformed);
}

/// Asks for the legal moves, then plays the first one.
fn protocol_endpoint(body: &serde_json::Value) -> Reply {
    let last = last_user_message(body);
    let first = last.split(", ").next().unwrap_or("");
    if first.len() >= 4 && first.len() <= 5 && first.chars().all(|c| c.is_ascii_alphanumeric()) {
        Reply::Json(completion(&format!("<think>easy</think>make_move {first}")))
    } else {
        Reply::Json(completion("get_legal_moves"))
    }
}

#[test]
fn full_game_against_endpoint() {
    let server = serve(protocol_endpoint);
    let cfg = GameConfig { seed: 5, ..GameConfig::new(PlayerSpec::Random, PlayerSpec::Llm(LlmEndpointConfig::new(&server.url, "proto"))) };
    let r = play_game(&cfg, 0);
    assert!(r.termination.is_chess_based(), "{}", r.termination);
    assert_ne!(r.result, SubjectResult::Excluded);
    assert_eq!(r.subject_label, "proto");
    let subject_plys = r.stats.subject_dialog_plys as u64;
    assert_eq!(r.stats.counts.turns_used as u64, 2 * subject_plys);
    assert_eq!(r.stats.counts.legal_move_queries as u64, subject_plys);
    assert_eq!(r.stats.tokens.completion_tokens, Some(7 * 2 * subject_plys));
    assert_eq!(server.requests().len() as u64, 2 * subject_plys);
}

#[test]
fn endpoint_timeout_ends_the_game() {
    let server = serve(|_| Reply::Delayed(Duration::from_secs(3), completion("late")));
    let mut llm = LlmEndpointConfig::new(&server.url, "slow");
    llm.timeout_secs = 0.2;
    let r = play_game(&GameConfig::new(PlayerSpec::Random, PlayerSpec::Llm(llm)), 0);
    assert_eq!(r.termination.name(), "model_error");
    assert_eq!(r.result, SubjectResult::Excluded);
}

fn moa_server() -> common::MockServer {
    serve(|body| {
        let model = body["model"].as_str().unwrap_or("");
        match model {
            "bad" => Reply::Status(503, "unavailable".into()),
            "synth" => Reply::Json(completion("make_move e7e5")),
            m => Reply::Json(completion(&format!("make_move e7e5 says {m}"))),
        }
    })
}

#[test]
fn mixture_of_agents_calls_and_blocks() {
    let server = moa_server();
    let ep = |m: &str| LlmEndpointConfig::new(&server.url, m);
    let cfg = MoaConfig {
        proposers: vec![ep("p1"), ep("p2"), ep("p3")],
        synthesizer: ep("synth"),
        system_prompt: None,
        label_template: "Model {i}:".into(),
    };
    let mut moa = MoaPlayer::from_config(&cfg).unwrap();
    let original = vec![ChatMessage::user("the game prompt")];
    let reply = moa.reply(&original).unwrap();
    assert_eq!(reply.content, "make_move e7e5");
    assert_eq!(reply.usage.unwrap().completion_tokens, Some(4 * 7));

    let reqs = server.requests();
    assert_eq!(reqs.len(), 4);
    let synth = reqs.iter().find(|r| r.body["model"] == "synth").unwrap();
    let msgs = synth.body["messages"].as_array().unwrap();
    assert_eq!(msgs.len(), 3);
    assert_eq!(msgs[0]["role"], "system");
    assert_eq!(msgs[0]["content"], SYNTHESIZER_PROMPT);
    assert_eq!(msgs[1]["content"], "the game prompt");
    assert_eq!(
        msgs[2]["content"],
        "Model 1:\nmake_move e7e5 says p1\n\nModel 2:\nmake_move e7e5 says p2\n\nModel 3:\nmake_move e7e5 says p3"
    );
}

#[test]
fn mixture_survives_a_failed_proposer() {
    let server = moa_server();
    let ep = |m: &str| LlmEndpointConfig::new(&server.url, m);
    let cfg = MoaConfig { proposers: vec![ep("p1"), ep("bad")], synthesizer: ep("synth"), system_prompt: None, label_template: "Model {i}:".into() };
    MoaPlayer::from_config(&cfg).unwrap().reply(&[ChatMessage::user("x")]).unwrap();
    let reqs = server.requests();
    let synth = reqs.iter().find(|r| r.body["model"] == "synth").unwrap();
    assert_eq!(last_user_message(&synth.body), format!("Model 1:\nmake_move e7e5 says p1\n\nModel 2:\n{NO_RESPONSE}"));
}

#[test]
fn mixture_needs_proposers() {
    let cfg = MoaConfig {
        proposers: vec![],
        synthesizer: LlmEndpointConfig::new("http://127.0.0.1:9/v1", "s"),
        system_prompt: None,
        label_template: "Model {i}:".into(),
    };
    assert_eq!(MoaPlayer::from_config(&cfg).err().unwrap().kind, ModelErrorKind::Config);
    assert!(PlayerSpec::Moa(cfg).validate().is_err());
}
