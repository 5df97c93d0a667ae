//! Holds the `acceptance` integration test, which runs every acceptance
//! criterion against the library and the `bpnld` command line.
