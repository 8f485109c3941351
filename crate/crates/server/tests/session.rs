use std::path::Path;

use ctf_core::arena::scripted_expert;
use ctf_core::demos::{read_demo, validate_demo};
use ctf_core::engine::Outcome;
use ctf_core::nn::{Checkpoint, PolicyParams};
use ctf_core::perception::obs_dim;
use ctf_core::{Action, ArenaConfig, Team};
use ctf_server::protocol::{TeamChoice, Winner};
use ctf_server::{
    replay_session, Outgoing, SeatKind, ServerConfig, ServerError, Session, Target, WireMessage,
};

fn cfg(dir: &Path, arena: ArenaConfig) -> ServerConfig {
    ServerConfig {
        session_id: "s1".into(),
        seed: 5,
        arena,
        demo_dir: dir.join("demos"),
        ..ServerConfig::default()
    }
}

fn join(s: &mut Session, conn: u64, team: TeamChoice) -> Vec<Outgoing> {
    s.handle(
        conn,
        WireMessage::Join {
            name: format!("p{conn}"),
            team,
        },
    )
    .unwrap()
}

fn welcome_seat(out: &[Outgoing]) -> Option<usize> {
    assert_eq!(out.len(), 1, "a join gets exactly one answer");
    match &out[0].msg {
        WireMessage::Welcome { player_id, .. } => Some(*player_id),
        _ => None,
    }
}

fn error_code(out: &[Outgoing]) -> Option<String> {
    out.iter().find_map(|o| match &o.msg {
        WireMessage::Error { code, .. } => Some(code.clone()),
        _ => None,
    })
}

fn input(s: &mut Session, conn: u64, mv: [f64; 2], act: f64) -> Vec<Outgoing> {
    s.handle(conn, WireMessage::Input { tick: 0, mv, act })
        .unwrap()
}

/// Sends the world-frame expert action of `seat` as a client would.
fn send_expert(s: &mut Session, conn: u64, seat: usize) {
    let a = scripted_expert(s.world(), seat);
    let b = a.branches;
    input(s, conn, [b[0] as f64 - 1.0, b[1] as f64 - 1.0], b[2] as f64);
}

#[test]
fn bot_checkpoint_fills_all_seats_and_waits() {
    let dir = tempfile::tempdir().unwrap();
    let dim = obs_dim(&ArenaConfig::default(), 24).unwrap();
    let ck = dir.path().join("bot.json");
    Checkpoint::new("bot", 1, 0, PolicyParams::init(dim, 1).unwrap())
        .save(&ck)
        .unwrap();
    let mut c = cfg(dir.path(), ArenaConfig::default());
    c.bot_checkpoint = Some(ck);
    let mut s = Session::new(c.clone()).unwrap();
    assert!((0..6).all(|i| s.seat_kind(i) == SeatKind::Bot));
    assert!(!s.is_running());
    assert!(s.tick().unwrap().is_empty());
    assert_eq!(s.world().tick, 0);

    // bots play once started
    s.start();
    for _ in 0..20 {
        s.tick().unwrap();
    }
    assert_eq!(s.world().tick, 20);

    let small = dir.path().join("small.json");
    Checkpoint::new("bot", 1, 0, PolicyParams::init(35, 1).unwrap())
        .save(&small)
        .unwrap();
    c.bot_checkpoint = Some(small);
    assert!(matches!(
        Session::new(c.clone()),
        Err(ServerError::Config(_))
    ));
    c.bot_checkpoint = Some(dir.path().join("missing.json"));
    assert!(matches!(Session::new(c), Err(ServerError::Checkpoint(_))));
}

#[test]
fn join_assignment_rules() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = Session::new(cfg(dir.path(), ArenaConfig::default())).unwrap();
    assert!((0..6).all(|i| s.seat_kind(i) == SeatKind::Scripted));
    assert_eq!(welcome_seat(&join(&mut s, 1, TeamChoice::Auto)), Some(0));
    assert!(s.is_running());
    assert_eq!(welcome_seat(&join(&mut s, 2, TeamChoice::Auto)), Some(3));
    assert_eq!(welcome_seat(&join(&mut s, 3, TeamChoice::Auto)), Some(1));
    assert_eq!(welcome_seat(&join(&mut s, 4, TeamChoice::White)), Some(4));
    assert_eq!(welcome_seat(&join(&mut s, 5, TeamChoice::White)), Some(5));
    assert_eq!(
        error_code(&join(&mut s, 6, TeamChoice::White)),
        Some("full".into())
    );
    // auto falls through to the team with room
    assert_eq!(welcome_seat(&join(&mut s, 7, TeamChoice::Auto)), Some(2));
    assert_eq!(s.humans(Team::Blue), 3);
    let out = join(&mut s, 8, TeamChoice::Auto);
    assert_eq!(welcome_seat(&out), None);
    assert_eq!(error_code(&out), Some("full".into()));
    assert_eq!(out[0].to, Target::Conn(8));
    assert_eq!(
        error_code(&join(&mut s, 1, TeamChoice::Auto)),
        Some("already_seated".into())
    );

    // a seat freed by leaving is reused and reverts to the default fill
    s.handle(4, WireMessage::Leave {}).unwrap();
    assert_eq!(s.seat_kind(4), SeatKind::Scripted);
    assert_eq!(welcome_seat(&join(&mut s, 6, TeamChoice::Auto)), Some(4));
    s.disconnect(1).unwrap();
    assert_eq!(s.seat_kind(0), SeatKind::Scripted);
    assert_eq!(s.finish().unwrap().demo_files.len(), 7);
}

#[test]
fn protocol_errors() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = Session::new(cfg(dir.path(), ArenaConfig::default())).unwrap();
    assert_eq!(
        error_code(&input(&mut s, 1, [1.0, 0.0], 0.0)),
        Some("not_seated".into())
    );
    assert_eq!(
        error_code(&s.handle(1, WireMessage::Leave {}).unwrap()),
        Some("not_seated".into())
    );
    assert_eq!(
        error_code(&s.handle_text(1, "{not json").unwrap()),
        Some("bad_message".into())
    );
    let welcome = WireMessage::error("x", "y").to_json();
    assert_eq!(
        error_code(&s.handle_text(1, &welcome).unwrap()),
        Some("bad_message".into())
    );
    assert_eq!(s.counters().bad_messages, 2);
    assert!(!s.is_running());
}

#[test]
fn latest_input_wins_and_absent_input_repeats_move() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = Session::new(cfg(dir.path(), ArenaConfig::open())).unwrap();
    join(&mut s, 1, TeamChoice::Blue);
    input(&mut s, 1, [1.0, 0.0], 0.0);
    input(&mut s, 1, [-1.0, 1.0], 1.0);
    s.tick().unwrap();
    assert!(s.world().players[0].vel.x < 0.0 && s.world().players[0].vel.y > 0.0);
    let x = s.world().players[0].pos.x;
    s.tick().unwrap();
    assert!(s.world().players[0].pos.x < x);
    // malformed values are clamped and counted
    input(&mut s, 1, [5.0, -0.4], 3.0);
    s.tick().unwrap();
    assert_eq!(s.counters().malformed_inputs, 1);
    let files = s.finish().unwrap().demo_files;
    let acts: Vec<_> = read_demo(&files[0])
        .unwrap()
        .steps
        .iter()
        .map(|st| st.act.branches)
        .collect();
    assert_eq!(acts, vec![[0, 2, 1], [0, 2, 0], [2, 1, 1]]);
}

#[test]
fn white_demo_actions_are_team_local() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = Session::new(cfg(dir.path(), ArenaConfig::open())).unwrap();
    join(&mut s, 1, TeamChoice::White);
    input(&mut s, 1, [1.0, 0.0], 0.0);
    s.tick().unwrap();
    assert!(s.world().players[3].vel.x > 0.0);
    let files = s.finish().unwrap().demo_files;
    assert_eq!(
        read_demo(&files[0]).unwrap().steps[0].act,
        Action::new([0, 1, 0]).unwrap()
    );
}

#[test]
fn human_demo_grows_one_step_per_tick() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = Session::new(cfg(dir.path(), ArenaConfig::default())).unwrap();
    join(&mut s, 1, TeamChoice::Auto);
    let file = dir.path().join("demos/s1_agent0_j000.ctfdemo.jsonl");
    for k in 1..=5 {
        send_expert(&mut s, 1, 0);
        let out = s.tick().unwrap();
        assert_eq!(out.len(), 1);
        assert!(matches!(out[0].msg, WireMessage::State { .. }) && out[0].to == Target::All);
        let lines = std::fs::read_to_string(&file).unwrap().lines().count();
        assert_eq!(lines, 1 + k);
    }
}

#[test]
fn round_end_carries_engine_time_then_intermission() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = Session::new(cfg(dir.path(), ArenaConfig::fetch_flag_curriculum())).unwrap();
    join(&mut s, 1, TeamChoice::Blue);
    let mut last_tick = None;
    let mut ends = Vec::new();
    for _ in 0..3000 {
        send_expert(&mut s, 1, 0);
        let world_before = s.world().tick;
        for o in s.tick().unwrap() {
            match o.msg {
                WireMessage::State { tick, .. } => {
                    assert!(last_tick.is_none_or(|l| tick == l + 1));
                    last_tick = Some(tick);
                }
                WireMessage::RoundEnd { winner, time_s } => {
                    let w = s.world();
                    assert_eq!(time_s, w.tick as f64 * w.arena.tick_dt);
                    match w.outcome {
                        Outcome::Won { team, .. } => {
                            assert_eq!(winner == Winner::Blue, team == Team::Blue)
                        }
                        _ => assert_eq!(winner, Winner::Draw),
                    }
                    ends.push((s.session_tick(), world_before + 1));
                }
                _ => panic!("unexpected frame"),
            }
        }
        if s.in_intermission() {
            assert!(s.world().outcome.is_over());
        }
    }
    assert!(ends.len() >= 2);
    // the next round starts exactly 100 ticks after the round ends
    let (end_tick, _) = ends[0];
    let mut s2 = Session::new(cfg(
        &dir.path().join("b"),
        ArenaConfig::fetch_flag_curriculum(),
    ))
    .unwrap();
    join(&mut s2, 1, TeamChoice::Blue);
    while s2.session_tick() < end_tick {
        send_expert(&mut s2, 1, 0);
        s2.tick().unwrap();
    }
    assert!(s2.world().outcome.is_over());
    for _ in 0..99 {
        s2.tick().unwrap();
        assert!(s2.world().outcome.is_over());
    }
    // the final intermission frame shows the fresh round
    s2.tick().unwrap();
    assert_eq!(s2.world().tick, 0);
    assert!(!s2.world().outcome.is_over());
    s2.tick().unwrap();
    assert_eq!(s2.world().tick, 1);
    assert_eq!(s2.rounds_played(), 1);
}

#[test]
fn idle_human_is_replaced() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(ServerConfig::default().idle_timeout_ticks, 1200);
    let mut c = cfg(dir.path(), ArenaConfig::default());
    c.idle_timeout_ticks = 40;
    let mut s = Session::new(c).unwrap();
    join(&mut s, 9, TeamChoice::White);
    input(&mut s, 9, [0.0, 1.0], 0.0);
    let mut kicked_at = None;
    for k in 1..=100 {
        let out = s.tick().unwrap();
        if let Some(code) = error_code(&out) {
            assert_eq!(code, "idle");
            kicked_at = Some(k);
            break;
        }
    }
    assert_eq!(kicked_at, Some(41));
    assert_eq!(s.seat_kind(3), SeatKind::Scripted);
    assert_eq!(s.seat_of(9), None);
    assert_eq!(
        error_code(&input(&mut s, 9, [0.0, 0.0], 0.0)),
        Some("not_seated".into())
    );
    assert_eq!(s.counters().idle_kicks, 1);
    // nobody seated: the session keeps ticking for spectators
    let out = s.tick().unwrap();
    assert!(matches!(out[0].msg, WireMessage::State { .. }));
    let summary = s.finish().unwrap();
    assert_eq!(read_demo(&summary.demo_files[0]).unwrap().steps.len(), 41);
}

#[test]
fn human_seat_is_transparent() {
    let dir = tempfile::tempdir().unwrap();
    let mut a = Session::new(cfg(&dir.path().join("a"), ArenaConfig::default())).unwrap();
    let mut b = Session::new(cfg(&dir.path().join("b"), ArenaConfig::default())).unwrap();
    join(&mut a, 1, TeamChoice::White);
    b.start();
    for _ in 0..3000 {
        send_expert(&mut a, 1, 3);
        a.tick().unwrap();
        b.tick().unwrap();
        assert_eq!(a.world(), b.world());
    }
    assert!(a.world().tick > 0);
}

#[test]
fn session_demos_validate_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let c = cfg(dir.path(), ArenaConfig::fetch_flag_curriculum());
    let log = c.log_path();
    let mut s = Session::new(c).unwrap();
    join(&mut s, 1, TeamChoice::Auto);
    join(&mut s, 2, TeamChoice::Auto);
    for k in 0..2500 {
        if k == 900 {
            s.handle(2, WireMessage::Leave {}).unwrap();
        }
        if k == 1300 {
            join(&mut s, 2, TeamChoice::White);
        }
        send_expert(&mut s, 1, 0);
        if let Some(seat) = s.seat_of(2) {
            if k % 7 != 0 {
                send_expert(&mut s, 2, seat);
            }
        }
        s.tick().unwrap();
    }
    assert!(s.rounds_played() >= 3);
    let summary = s.finish().unwrap();
    assert_eq!(summary.demo_files.len(), 3);
    let mut total = 0;
    for f in &summary.demo_files {
        let r = validate_demo(f);
        assert!(r.ok, "{}: {:?}", f.display(), r.problems);
        total += r.steps;
    }
    let rep = replay_session(&log).unwrap();
    assert_eq!(rep.demos, 3);
    assert_eq!(rep.demo_steps, total);
    // every tick steps the engine except the 100-tick intermissions
    let r = summary.rounds;
    assert!(rep.engine_steps <= 2500 - 100 * (r - 1) && rep.engine_steps >= 2500 - 100 * r);

    // a tampered observation is caught
    let f = &summary.demo_files[0];
    let text = std::fs::read_to_string(f).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut v: serde_json::Value = serde_json::from_str(&lines[10]).unwrap();
    v["obs"][0] = serde_json::json!(0.123);
    lines[10] = v.to_string();
    std::fs::write(f, lines.join("\n") + "\n").unwrap();
    assert!(replay_session(&log)
        .unwrap_err()
        .contains("observation differs"));
}

#[test]
fn config_file_round_trip_and_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("server.json");
    let c = cfg(dir.path(), ArenaConfig::fetch_flag_curriculum());
    std::fs::write(&p, serde_json::to_string_pretty(&c).unwrap()).unwrap();
    assert_eq!(ServerConfig::load(&p).unwrap(), c);
    std::fs::write(&p, r#"{"port": 1, "colour": "red"}"#).unwrap();
    assert!(ServerConfig::load(&p).is_err());
    std::fs::write(&p, r#"{"port": 9000}"#).unwrap();
    let d = ServerConfig::load(&p).unwrap();
    assert_eq!((d.port, d.intermission_ticks), (9000, 100));
    assert!(ServerConfig::load(&dir.path().join("nope.json")).is_err());
}
