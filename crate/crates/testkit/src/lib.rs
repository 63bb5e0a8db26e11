//! Reference oracles and fixture generators shared by the test suites.
//!
//! Everything here works on plain values (strings, numbers, id pairs) and
//! is written from the textbook definitions, independently of the library
//! code it is used to check.

pub mod gen;
pub mod oracle;

/// An instruction body that passes the quality filters and carries no
/// risky commands.
pub const GOOD_BODY: &str = "## Prerequisites\nA POSIX shell with coreutils.\n\n\
1. Open the input file and check that it is readable.\n\
2. Parse each line into fields separated by commas.\n\
3. Render the fields as a Markdown table with a header row.\n\
4. Save the table next to the input with a .md extension.\n\
5. Report the number of rows converted.\n\n\
Expected runtime: under a second.\n";
