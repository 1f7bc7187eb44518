//! Acceptance suite for the workspace. The checks live in `tests/acceptance.rs`
//! and print one `criterion N: PASS|FAIL` line each.
