"""QA pair generation: answer selection and question generation."""

from ._core import (
    Config,
    ConfigError,
    ContractViolation,
    DataError,
    NumericError,
    ParseError,
    bleu,
    checkpoint_info,
    decode_bio,
    decode_forced,
    encode_bio,
    evaluate,
    evaluate_files,
    format_tagged_line,
    generate,
    gradcheck,
    human_eval,
    human_eval_file,
    indices_to_tokens,
    locate_answer,
    meteor,
    parse_tagged_line,
    prepare,
    rouge_l,
    select_answer,
    tokenize,
    train,
    variants,
)

__all__ = [name for name in dir() if not name.startswith("_")]
