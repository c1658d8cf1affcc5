use crate::CliResult;

/// In-memory CSV with a mandatory header row and LF line endings.
pub(crate) struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub(crate) fn new(header: &[&str]) -> CliResult<Self> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        writer.write_record(header).map_err(csv_err)?;
        Ok(Self { writer })
    }

    pub(crate) fn row<I, S>(&mut self, fields: I) -> CliResult<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).map_err(csv_err)
    }

    pub(crate) fn finish(self) -> CliResult<String> {
        let bytes = self
            .writer
            .into_inner()
            .map_err(|e| crate::CliError::Usage(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is built from UTF-8 fields"))
    }
}

fn csv_err(e: csv::Error) -> crate::CliError {
    crate::CliError::Usage(format!("csv: {e}"))
}

/// Shortest decimal that parses back to the same `f64`.
pub(crate) fn num(v: f64) -> String {
    format!("{v}")
}
