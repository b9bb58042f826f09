use crate::llm::ChatMessage;

use super::RepairError;

const PERSONA: &str = "You are an experienced COBOL software engineer with deep knowledge of COBOL syntax, structure, and best practices.";

const REPAIR_INSTRUCTIONS: &str = "Your task is to perform debugging on a given COBOL program with the compilation errors.\n\n\
Below is the original COBOL code followed by the compiler\u{2019}s error log. Your job is to revise the code to resolve all compilation errors, ensuring that the corrected program is not only syntactically valid but also logically sound.\n\n\
Please carefully analyze the error messages and update the code accordingly. Prioritize clarity, maintainability, and adherence to COBOL\u{2019}s structural rules.";

const REFINE_INSTRUCTIONS: &str =
    "Review the following COBOL program and improve it so it is syntactically valid and logically sound.";

fn block(text: &str) -> &str {
    text.trim_end_matches(['\n', '\r'])
}

/// Single-turn repair prompt carrying the latest code and its error log.
pub fn build_repair_prompt(source: &str, error_log: &str) -> Result<Vec<ChatMessage>, RepairError> {
    if error_log.trim().is_empty() {
        return Err(RepairError::EmptyErrorLog);
    }
    let text = format!(
        "{PERSONA} {REPAIR_INSTRUCTIONS}\n\nInput:\n\nCOBOL Code:\n{}\n\nCompiler Error Log:\n{}\n",
        block(source),
        block(error_log)
    );
    Ok(vec![ChatMessage::user(text)])
}

/// Improve-only prompt used by the refinement baseline. No diagnostics.
pub fn build_refine_prompt(source: &str) -> Vec<ChatMessage> {
    let text = format!("{PERSONA}\n\n{REFINE_INSTRUCTIONS}\n\nInput:\n\nCOBOL Code:\n{}\n", block(source));
    vec![ChatMessage::user(text)]
}
