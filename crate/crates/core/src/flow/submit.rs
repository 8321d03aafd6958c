use super::{
    generate_script, Bundle, BundleMode, BundledOperation, FlowError, JobOperation, Resources, Scheduler,
    SchedulerError, SchedulerStatus, StatusStore, Workflow,
};

#[derive(Debug, Clone)]
pub struct SubmitOptions {
    /// Restrict to these operations; all when empty.
    pub op_names: Vec<String>,
    /// Job-operations per script; at least 1.
    pub bundle_size: usize,
    pub mode: BundleMode,
    pub resources: Resources,
    /// Generate scripts without submitting or recording anything.
    pub pretend: bool,
}

impl Default for SubmitOptions {
    fn default() -> Self {
        Self {
            op_names: Vec::new(),
            bundle_size: 1,
            mode: BundleMode::Serial,
            resources: Resources::new(),
            pretend: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Submission {
    /// `None` in pretend mode.
    pub cluster_job_id: Option<String>,
    pub members: Vec<JobOperation>,
    pub script: String,
}

#[derive(Debug, Clone, Default)]
pub struct SubmitReport {
    pub submitted: Vec<Submission>,
    /// Eligible job-operations skipped because they are queued or active.
    pub skipped: Vec<JobOperation>,
    /// Set when the scheduler refused a bundle; later bundles were not
    /// attempted and earlier ones stay submitted.
    pub rejected: Option<(Vec<JobOperation>, SchedulerError)>,
}

impl SubmitReport {
    pub fn cluster_job_ids(&self) -> Vec<&str> {
        self.submitted
            .iter()
            .filter_map(|s| s.cluster_job_id.as_deref())
            .collect()
    }
}

/// Submits every eligible job-operation that is not already queued or
/// active, `bundle_size` per script, and records the submissions in the
/// project status store.
pub fn submit(
    workflow: &Workflow,
    scheduler: &mut dyn Scheduler,
    options: &SubmitOptions,
) -> Result<SubmitReport, FlowError> {
    if options.bundle_size == 0 {
        return Err(FlowError::InvalidBundleSize);
    }
    workflow.check_names(&options.op_names)?;
    let mut store = StatusStore::load(workflow.project())?;
    let mut report = SubmitReport::default();

    let mut pending = Vec::new();
    for job in workflow.project().jobs()? {
        for op in workflow.next_operations(&job) {
            if !options.op_names.is_empty() && !options.op_names.contains(&op.name) {
                continue;
            }
            let jo = JobOperation::new(job.id().clone(), op.name.clone());
            let known = match scheduler.status(&jo.id()) {
                SchedulerStatus::Unknown => store.get(&jo.id()).map_or(SchedulerStatus::Unknown, |e| e.last_status),
                s => s,
            };
            if known.is_pending() {
                report.skipped.push(jo);
                continue;
            }
            pending.push(BundledOperation {
                command: op.render(&job)?,
                workdir: job.workspace(),
                job_operation: jo,
            });
        }
    }

    let mut chunks = pending.chunks(options.bundle_size);
    for chunk in chunks.by_ref() {
        let bundle = Bundle::new(chunk.to_vec(), options.mode)?;
        let script = generate_script(&bundle, scheduler.dialect(), &options.resources)?;
        let members = bundle.job_operations();
        if options.pretend {
            report.submitted.push(Submission {
                cluster_job_id: None,
                members,
                script,
            });
            continue;
        }
        match scheduler.submit(&script, &members) {
            Ok(cluster_id) => {
                for jo in &members {
                    store.record(jo.id(), cluster_id.clone(), SchedulerStatus::Queued);
                }
                report.submitted.push(Submission {
                    cluster_job_id: Some(cluster_id),
                    members,
                    script,
                });
            }
            Err(e) => {
                report.rejected = Some((members, e));
                break;
            }
        }
    }
    if !options.pretend {
        store.sync_from(&*scheduler);
        store.save()?;
    }
    Ok(report)
}
