use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::PathBuf;

use sha2::{Digest, Sha256};
use serde_json::json;

use super::write_json;
use crate::args::{required, FetchArgs, Mergeable};
use crate::error::{CliError, CliResult};
use crate::meta::Metadata;

pub fn run(args: FetchArgs) -> CliResult<()> {
    let args = args.resolve()?;
    let url = required(args.url.clone(), "url")?;
    let out = required(args.out.clone(), "out")?;
    let expected = args.sha256.as_deref().map(|s| s.trim().to_ascii_lowercase());
    if let Some(e) = &expected {
        if e.len() != 64 || !e.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(CliError::Usage(format!("--sha256 must be 64 hex digits, got `{e}`")));
        }
    }

    let resp = ureq::get(&url).call().map_err(|e| CliError::Network(format!("{url}: {e}")))?;
    let mut reader = resp.into_body().into_reader();
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut part = out.clone().into_os_string();
    part.push(".part");
    let part = PathBuf::from(part);

    let mut hasher = Sha256::new();
    let mut bytes = 0u64;
    let copied = (|| -> CliResult<()> {
        let mut w = BufWriter::new(File::create(&part)?);
        let mut buf = vec![0u8; 64 * 1024];
        loop {
            let k = reader
                .read(&mut buf)
                .map_err(|e| CliError::Network(format!("{url}: {e}")))?;
            if k == 0 {
                break;
            }
            hasher.update(&buf[..k]);
            w.write_all(&buf[..k])?;
            bytes += k as u64;
        }
        w.flush()?;
        Ok(())
    })();
    if let Err(e) = copied {
        let _ = std::fs::remove_file(&part);
        return Err(e);
    }
    let actual = hex::encode(hasher.finalize());
    if let Some(expected) = expected {
        if expected != actual {
            let _ = std::fs::remove_file(&part);
            return Err(CliError::Checksum { expected, actual });
        }
    }
    std::fs::rename(&part, &out)?;
    let meta = Metadata::new("fetch", None, &args);
    write_json(
        None,
        &json!({ "metadata": meta, "url": url, "path": out, "bytes": bytes, "sha256": actual }),
    )
}
