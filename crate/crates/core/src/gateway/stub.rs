//! A scripted HTTP backend for tests. The script sees each decoded request
//! and how many times an identical request was received before.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use tiny_http::{Header, Response, Server};

use super::protocol::{BackendRequest, BackendResponse};

#[derive(Debug, Clone)]
pub enum StubReply {
    Json(BackendResponse),
    /// Non-2xx status with a plain-text body.
    Status(u16, String),
    /// 200 with an arbitrary body.
    Raw(String),
    /// Waits before sending the inner reply.
    Delayed(Duration, Box<StubReply>),
}

impl StubReply {
    pub fn text(output: impl Into<String>) -> Self {
        StubReply::Json(BackendResponse::outputs(vec![output.into()]))
    }
}

type Script = dyn Fn(&BackendRequest, u32) -> StubReply + Send + Sync;

pub struct StubServer {
    url: String,
    server: Arc<Server>,
    worker: Option<JoinHandle<()>>,
    log: Arc<Mutex<Vec<BackendRequest>>>,
}

impl StubServer {
    /// Listens on an ephemeral localhost port. `script(request, previous)`
    /// decides the reply; `previous` counts earlier identical requests.
    pub fn start<F>(script: F) -> std::io::Result<Self>
    where
        F: Fn(&BackendRequest, u32) -> StubReply + Send + Sync + 'static,
    {
        let server = Server::http("127.0.0.1:0").map_err(std::io::Error::other)?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| std::io::Error::other("stub server has no IP address"))?;
        let server = Arc::new(server);
        let log = Arc::new(Mutex::new(Vec::new()));
        let script: Arc<Script> = Arc::new(script);
        let seen = Arc::new(Mutex::new(HashMap::<String, u32>::new()));

        let worker = {
            let server = Arc::clone(&server);
            let log = Arc::clone(&log);
            std::thread::spawn(move || {
                for mut request in server.incoming_requests() {
                    let (log, script, seen) = (Arc::clone(&log), Arc::clone(&script), Arc::clone(&seen));
                    std::thread::spawn(move || {
                        let mut body = Vec::new();
                        let reply = match request.as_reader().read_to_end(&mut body) {
                            Err(e) => StubReply::Status(400, e.to_string()),
                            Ok(_) => match serde_json::from_slice::<BackendRequest>(&body) {
                                Err(e) => StubReply::Status(400, e.to_string()),
                                Ok(req) => {
                                    let key = String::from_utf8_lossy(&body).into_owned();
                                    let previous = {
                                        let mut seen = seen.lock().unwrap_or_else(|e| e.into_inner());
                                        let n = seen.entry(key).or_insert(0);
                                        *n += 1;
                                        *n - 1
                                    };
                                    let reply = script(&req, previous);
                                    log.lock().unwrap_or_else(|e| e.into_inner()).push(req);
                                    reply
                                }
                            },
                        };
                        let _ = request.respond(render(reply));
                    });
                }
            })
        };

        Ok(StubServer {
            url: format!("http://{addr}/"),
            server,
            worker: Some(worker),
            log,
        })
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    /// Every decoded request received so far, in arrival order.
    pub fn requests(&self) -> Vec<BackendRequest> {
        self.log.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn request_count(&self) -> usize {
        self.log.lock().unwrap_or_else(|e| e.into_inner()).len()
    }
}

fn render(reply: StubReply) -> Response<std::io::Cursor<Vec<u8>>> {
    let json = Header::from_bytes("Content-Type", "application/json").expect("static header");
    match reply {
        StubReply::Json(r) => Response::from_data(serde_json::to_vec(&r).expect("response serializes"))
            .with_header(json),
        StubReply::Status(code, body) => Response::from_data(body.into_bytes()).with_status_code(code),
        StubReply::Raw(body) => Response::from_data(body.into_bytes()),
        StubReply::Delayed(d, inner) => {
            std::thread::sleep(d);
            render(*inner)
        }
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}
