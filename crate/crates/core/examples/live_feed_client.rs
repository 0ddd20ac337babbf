//! Starts a live server in-process and talks to it like the web UI would:
//! mouse positions stand in for gaze and a blink message triggers a tap.
use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;

use iscreen::events::{Lexicon, SessionConfig};
use iscreen::io::serve::{ClientMessage, ServeConfig, ServeSource, Server, ServerMessage};
use iscreen::screen::ScreenSize;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ServeConfig {
        screen: ScreenSize::new(1080, 1920),
        layout: None,
        lexicon: Lexicon::english_1000(),
        session: SessionConfig::default(),
        source: ServeSource::Live { fps: 30.0 },
    };
    let server = Server::bind("127.0.0.1:0", cfg)?.spawn()?;
    let stream = TcpStream::connect(server.addr())?;
    stream.set_read_timeout(Some(std::time::Duration::from_secs(2)))?;
    let mut tx = stream.try_clone()?;
    let rx = BufReader::new(stream).lines();

    let mut send = |m: &ClientMessage| writeln!(tx, "{}", serde_json::to_string(m).unwrap());
    let mut t = 0.0;
    for _ in 0..15 {
        send(&ClientMessage::MouseGaze { t, x: 200.0, y: 400.0 })?;
        t += 33.0;
    }
    send(&ClientMessage::Blink { t, dur: 400.0 })?;
    send(&ClientMessage::MouseGaze { t: t + 400.0, x: 200.0, y: 400.0 })?;

    for line in rx {
        let line = line?;
        match serde_json::from_str::<ServerMessage>(&line)? {
            ServerMessage::Gaze { .. } => {}
            ServerMessage::Event(e) => {
                println!("event {}", serde_json::to_string(&e)?);
                break;
            }
            other => println!("{}", serde_json::to_string(&other)?),
        }
    }
    server.shutdown()?;
    Ok(())
}
