//! Holder crate for the `acceptance` test target, which runs after the
//! `aptp` suites and prints one PASS/FAIL line per criterion.
