//! Shared driver plumbing: output resolution, atomic writes, exit-code
//! mapping.

use std::path::{Path, PathBuf};

use genreg::error::Error;

/// 0 success, 1 config error, 2 numerical abort.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Numerical(_) => 2,
        _ => 1,
    }
}

/// Resolve the output directory: flag > GENREG_OUT > config > "runs".
pub fn resolve_out(flag: Option<&Path>, config: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Ok(env) = std::env::var("GENREG_OUT") {
        if !env.is_empty() {
            return PathBuf::from(env);
        }
    }
    config.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("runs"))
}

/// Resolve the job count: flag > GENREG_JOBS > config > 1.
pub fn resolve_jobs(flag: Option<usize>, config: Option<usize>) -> usize {
    if let Some(j) = flag {
        return j.max(1);
    }
    if let Ok(env) = std::env::var("GENREG_JOBS") {
        if let Ok(j) = env.parse::<usize>() {
            return j.max(1);
        }
    }
    config.unwrap_or(1).max(1)
}

/// Write a file atomically: temp file in the same directory, then rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("out"),
        std::process::id()
    ));
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(tmp.display().to_string(), e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code_for(&Error::Config("x".into())), 1);
        assert_eq!(exit_code_for(&Error::Numerical("x".into())), 2);
        assert_eq!(
            exit_code_for(&Error::InvalidArgument("x".into())),
            1
        );
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = std::env::temp_dir().join(format!("grg_atomic_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("f.csv");
        atomic_write(&p, b"one").unwrap();
        atomic_write(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
