/// Phenotype shorthands. Each appears twice in the task list, once for the
/// all-notes cohort (`PA` prefix) and once for the first-note cohort (`PF`).
pub const PHENOTYPES: [&str; 28] = [
    "Acute Renal",
    "Cerebrovascular",
    "Myocardial",
    "Dysrhythmias",
    "Chronic Kidney",
    "COPD",
    "Comp. Surgical",
    "Conduction",
    "Heart Failure",
    "Atherosclerosis",
    "Diabetes Comp",
    "Diabetes No Comp",
    "Lipid Metabolism",
    "Hypertension",
    "Fluid Disorder",
    "GI Hemorrhage",
    "Hypertension Comp",
    "Other Liver",
    "Lower Resp",
    "Upper Resp",
    "Pleurisy",
    "Pneumonia",
    "Resp Failure",
    "Septicemia",
    "Shock",
    "Chronic",
    "Acute",
    "Disease",
];

pub const MORTALITY_TASK: &str = "Inhosp Mort";

/// The 57 standard task ids: mortality, then every phenotype for the
/// all-notes cohort, then every phenotype for the first-note cohort.
pub fn task_ids() -> Vec<String> {
    let mut ids = vec![MORTALITY_TASK.to_string()];
    for prefix in ["PA", "PF"] {
        ids.extend(PHENOTYPES.iter().map(|p| format!("{prefix} {p}")));
    }
    ids
}

pub fn is_known_task(id: &str) -> bool {
    id == MORTALITY_TASK
        || ["PA ", "PF "]
            .iter()
            .any(|prefix| id.strip_prefix(prefix).is_some_and(|p| PHENOTYPES.contains(&p)))
}
