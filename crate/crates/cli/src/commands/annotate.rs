use std::sync::Arc;

use evsynth_annotate::{serve, AnnotationConfig, Store};
use serde_json::json;

use super::Output;
use crate::error::{Category, CliError};
use crate::{io, AnnotateCmd, Ctx};

pub fn run(_ctx: &Ctx, cmd: AnnotateCmd) -> Result<Output, CliError> {
    match cmd {
        AnnotateCmd::Serve { server_config, addr } => {
            let cfg = AnnotationConfig::load(&server_config)?;
            let store = Store::open(&cfg)?;
            eprintln!("annotation server listening on http://{addr}");
            serve(Arc::new(store), cfg.static_dir.clone(), addr)
                .map_err(|e| CliError::new(Category::Io, format!("{addr}: {e}")))?;
            Ok(Output::new("", json!({"stopped": true})))
        }
        AnnotateCmd::Export { server_config, token, out } => {
            let cfg = AnnotationConfig::load(&server_config)?;
            let store = Store::open(&cfg)?;
            let text = store.export(&token)?;
            let rows = text.lines().count();
            io::write_bytes(out.as_deref(), text.as_bytes())?;
            let summary = match &out {
                Some(p) => format!("exported {rows} judgments -> {}", p.display()),
                None => String::new(),
            };
            Ok(Output::new(summary, json!({"judgments": rows})))
        }
    }
}
