//! Acceptance checks for `cglwaves`. Run them with `cargo test -p cglwaves-validation --test acceptance`.
