from typing import Any, Dict, Iterator, TextIO, Tuple, Union

# The log line indicating that results up to this point were written out.
SAVED_MSG = "# saved\n"


def read_log(log_reader: Union[str, TextIO]) -> Iterator[Tuple[int, Dict[str, Any]]]:
    """
    Read entries in a log file as dicts.

    Returns an iterator over (rep, dict) pairs.
    """
    if isinstance(log_reader, str):
        with open(log_reader, "rt") as f:
            yield from read_log(f)
            return
    line_idx = 0
    while True:
        line = log_reader.readline().rstrip()
        line_idx += 1
        if not line:
            break
        elif line.startswith("#"):
            continue
        try:
            if not line.startswith("rep "):
                raise ValueError
            rep_str, kv_str = line[4:].split(": ")
            rep_idx = int(rep_str)
            kvs = {}
            for kv_str in kv_str.split(" "):
                k_str, v_str = kv_str.split("=")
                kvs[k_str] = float(v_str)
        except ValueError:
            raise ValueError(f"unexpected format at line {line_idx}")
        yield rep_idx, kvs


def _format_value(v: Any) -> str:
    if isinstance(v, (bool, int)):
        return str(int(v))
    return f"{v:.05f}"


class Logger:
    """
    Log verification runs and benchmark repetitions to a file and to
    standard output.

    Each repetition is a line of numerical key=value pairs. Free-form events
    such as rejections and transport errors are written as comment lines,
    which read_log() skips.

    The log can be resumed, in which case it is truncated to the last save
    marker (or not truncated, if no saves are marked). The first repetition
    index of a resumed run is the start_rep attribute.
    """

    def __init__(self, out_filename: str, resume: bool = False, echo: bool = True):
        self.start_rep = 0
        self.echo = echo
        if resume:
            with open(out_filename, "r") as in_file:
                all_lines = in_file.readlines()

            if SAVED_MSG in all_lines:
                keep_lines = len(all_lines) - all_lines[::-1].index(SAVED_MSG)
                all_lines = all_lines[:keep_lines]

            rep_lines = [x for x in all_lines if x.startswith("rep ")]
            if len(rep_lines):
                self.start_rep = int(rep_lines[-1].split(" ")[1].split(":")[0]) + 1

            self.out_file = open(out_filename, "w+")
            self.out_file.write("".join(all_lines))
            self.out_file.flush()
        else:
            self.out_file = open(out_filename, "w+")

    def log(self, rep: int, **kwargs):
        fields = " ".join(f"{k}={_format_value(v)}" for k, v in kwargs.items())
        self._write(f"rep {rep + self.start_rep}: {fields}")

    def note(self, message: str):
        self._write("# " + message.replace("\n", " "))

    def mark_save(self):
        self.out_file.write(SAVED_MSG)
        self.out_file.flush()

    def close(self):
        self.out_file.close()

    def __enter__(self) -> "Logger":
        return self

    def __exit__(self, *_):
        self.close()

    def _write(self, line: str):
        self.out_file.write(line + "\n")
        self.out_file.flush()
        if self.echo:
            print(line)
