//! Synthetic corpus shared by the integration tests: five documentation
//! projects, one standards file with numbered clauses and an annex, and a
//! question file with references.

#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use ragft::config::RunConfig;
use ragft::{ProviderSet, Stage};
use ragft_core::chunk::ChunkingConfig;

pub const TOPICS: &[(&str, &str)] = &[
    ("software verification plan", "defines the reviews, analyses and tests applied to every software component"),
    ("software validation report", "records how the integrated software meets the overall requirements"),
    ("hazard log", "lists each identified hazard with its mitigation and closure status"),
    ("configuration management plan", "controls baselines, change requests and release identifiers"),
    ("requirements traceability matrix", "links each requirement to design elements and test cases"),
    ("coding standard", "restricts language features and sets naming and complexity limits"),
    ("integration test specification", "describes the test environment and the order of component integration"),
    ("maintenance procedure", "governs corrective changes after deployment and regression testing"),
    ("tool qualification report", "justifies the confidence placed in each support tool"),
    ("software architecture specification", "describes components, interfaces and the allocation of integrity levels"),
    ("quality assurance plan", "sets out audits, metrics and the handling of non conformities"),
    ("deployment manual", "explains installation steps, rollback and acceptance checks on site"),
];

const ROLES: &[&str] = &["verifier", "validator", "project manager", "safety engineer", "integrator"];
const SYSTEMS: &[&str] = &["interlocking", "train control", "level crossing", "axle counter", "signal controller"];

pub const PROJECTS: usize = 5;
const FILES_PER_PROJECT: usize = 3;
const PARAGRAPHS_PER_FILE: usize = 6;

fn paragraph(p: usize, f: usize, k: usize) -> String {
    let (name, purpose) = TOPICS[(p * 7 + f * 5 + k * 3) % TOPICS.len()];
    let system = SYSTEMS[p % SYSTEMS.len()];
    let role = ROLES[(f + k) % ROLES.len()];
    format!(
        "Section {k} of the {system} {name}. The {name} {purpose} for the {system} system. \
         The {name} is maintained by the {role} and reviewed at every release. \
         Records of the {name} are stored in the configuration system with unique identifiers \
         and revision {p}.{f}.{k}.\n"
    )
}

pub fn project_name(p: usize) -> String {
    format!("project-{:02}", p + 1)
}

pub const STANDARDS: &str = "\
5 General requirements
Software shall be developed under a documented lifecycle with defined roles and independence between the \
implementer, verifier and validator. The lifecycle shall be recorded in the quality assurance plan.

5.1 Software planning
A software verification plan shall be written before design begins. It shall describe reviews, analyses \
and the criteria used to judge the completion of each phase.

5.1.1 Planning records
Planning documents shall be placed under configuration management and carry unique identifiers and \
revision history for each release.

5.2 Configuration management
Every configuration item shall be identified, baselined and controlled. Change requests shall be \
analysed for impact before approval.

6 Software assurance
Assurance activities shall provide evidence that the software satisfies its requirements at the \
declared integrity level.

6.2 Verification
Verification shall be performed by a verifier independent of the implementer. Verification results \
shall be recorded in a verification report.

6.2.4.13 Verification report content
The verification report shall identify the items verified, the techniques applied, the deviations \
found and the conclusions reached, and shall state whether the phase may be closed.

7 Validation
The validator shall confirm that the integrated software meets the overall software requirements in \
the target environment and record the outcome in a validation report.

Annex B Techniques and measures
Techniques such as static analysis, boundary value testing and traceability analysis are recommended \
according to the integrity level. The selection of techniques shall be justified in the plans.
";

pub struct Fixture {
    pub root: PathBuf,
    pub docs: PathBuf,
    pub standards: PathBuf,
    pub questions: PathBuf,
}

/// Writes the corpus below `root`.
pub fn write_fixture(root: &Path) -> Fixture {
    let docs = root.join("docs");
    for p in 0..PROJECTS {
        let dir = docs.join(project_name(p));
        fs::create_dir_all(&dir).unwrap();
        for f in 0..FILES_PER_PROJECT {
            let text: String = (0..PARAGRAPHS_PER_FILE).map(|k| paragraph(p, f, k)).collect::<Vec<_>>().join("\n");
            fs::write(dir.join(format!("manual-{f}.md")), text).unwrap();
        }
    }
    let standards = root.join("standards.md");
    fs::write(&standards, STANDARDS).unwrap();
    let questions = root.join("questions.json");
    fs::write(&questions, serde_json::to_vec_pretty(&question_records()).unwrap()).unwrap();
    Fixture { root: root.to_path_buf(), docs, standards, questions }
}

const REFS: &[&str] = &["(see 6.2.4.13)", "(see Annex B)", "(see 5.1)", "(see 5.2)"];

pub fn question_records() -> Vec<serde_json::Value> {
    let mut out = Vec::new();
    for (i, (name, _)) in TOPICS.iter().enumerate() {
        let texts = [
            format!("Does the user documentation contain a {name}?"),
            format!("Does the user documentation contain evidence that the {name} is reviewed at every release?"),
            format!(
                "Does the user documentation contain records showing the {name} is maintained with unique identifiers?"
            ),
        ];
        for (v, text) in texts.into_iter().enumerate() {
            let text = if v == 1 && i < REFS.len() {
                format!("{} {}", text.trim_end_matches('?'), REFS[i]) + "?"
            } else {
                text
            };
            out.push(serde_json::json!({ "id": format!("Q{:03}", i * 3 + v + 1), "text": text, "origin": "shall_statement" }));
        }
    }
    for (j, name) in ["coding standard", "hazard log", "deployment manual", "quality assurance plan"].iter().enumerate()
    {
        out.push(serde_json::json!({
            "id": format!("G{:03}", j + 1),
            "text": format!("Does the user documentation contain guidance on how the {name} is approved?"),
            "origin": "internal_guidance",
        }));
    }
    out
}

/// Configuration used by the end-to-end tests: small chunks so the corpus
/// yields many of them.
pub fn test_config(seed: u64) -> RunConfig {
    RunConfig { chunking: ChunkingConfig { chunk_tokens: 60, overlap_tokens: 10 }, seed, ..RunConfig::default() }
}

/// Runs ingest, index, pair and generate into `work` with mock providers.
pub fn run_pipeline(fixture: &Fixture, work: &Path, seed: u64) -> Stage {
    run_pipeline_with(fixture, work, test_config(seed))
}

pub fn run_pipeline_with(fixture: &Fixture, work: &Path, config: RunConfig) -> Stage {
    let stage = Stage::new(config, work);
    let providers = ProviderSet::mock();
    stage.ingest(&fixture.docs, std::slice::from_ref(&fixture.standards), &fixture.questions, false).unwrap();
    stage.index(&providers, false).unwrap();
    stage.pair(&providers, false, false).unwrap();
    stage.generate(&providers, false, false).unwrap();
    stage
}
