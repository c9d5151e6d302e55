use std::process::Command;

fn main() {
    println!("cargo:rerun-if-changed=../../.git/HEAD");
    println!("cargo:rerun-if-changed=../../.git/index");
    println!("cargo:rerun-if-env-changed=UAVTILT_BUILD_ID");
    let id = std::env::var("UAVTILT_BUILD_ID").ok().or_else(|| {
        let out = Command::new("git")
            .args(["describe", "--always", "--dirty", "--tags"])
            .output()
            .ok()?;
        out.status
            .success()
            .then(|| String::from_utf8_lossy(&out.stdout).trim().to_string())
    });
    let version = std::env::var("CARGO_PKG_VERSION").unwrap_or_default();
    let id = match id {
        Some(g) if !g.is_empty() => format!("v{version}-{g}"),
        _ => format!("v{version}-unknown"),
    };
    println!("cargo:rustc-env=UAVTILT_BUILD_ID={id}");
}
