"""
CLI interface for the automaton-group key agreement toolkit.
"""

import functools
import json
import socket
import sys
from typing import Optional, Tuple

import click
from pydantic import ValidationError
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from .affine import AffineElement
from .attack import AttackReport, AttackStatus, attack_transcript
from .automaton import GeneratorWord
from .config import AttackSettings, SessionSettings, Settings, load_platform_config
from .errors import ConfigError, ExchangeError, ToolkitError
from .platforms import AutomatonPlatform, PlatformDescriptor, get_platform, list_platforms
from .portrait import Portrait, SectionLeaf, portrait
from .protocol import (
    Side,
    Transcript,
    exchange_local,
    gen_private,
    make_params,
    make_transmission,
)
from .utils import SplitMix64, Timer, hex_digest, loglog_slope, setup_logging
from .words import format_index_word, invert_index_word, reduce_index_word
from .wire import Role, run_exchange


console = Console()
err_console = Console(stderr=True)

EXIT_NOT_FOUND = 6
PLATFORM_CHOICES = ["grigorchuk", "g_omega", "basilica", "universal", "hanoi", "affine"]


def handle_errors(func):
    """Map toolkit errors to their exit codes."""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except ToolkitError as exc:
            err_console.print(f"[bold red]Error ({type(exc).__name__}):[/] {exc}")
            sys.exit(exc.exit_code)
        except OSError as exc:
            err_console.print(f"[bold red]Connection error:[/] {exc}")
            sys.exit(ExchangeError.exit_code)
    return wrapper


def platform_options(func):
    func = click.option("-p", "--platform", "platform_name", default="grigorchuk",
                        type=click.Choice(PLATFORM_CHOICES), help="Platform to use")(func)
    func = click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                        help="Platform config file (affine, g_omega, hanoi)")(func)
    return func


def session_options(func):
    for option in reversed([
        click.option("-n", "n", default=None, type=click.IntRange(min=1), help="Alice's generator count"),
        click.option("-m", "m", default=None, type=click.IntRange(min=1), help="Bob's generator count"),
        click.option("--s", "s", default=None, type=click.IntRange(min=1), help="Alice's private word length"),
        click.option("--t", "t", default=None, type=click.IntRange(min=1), help="Bob's private word length"),
        click.option("--gen-len", default=None, type=click.IntRange(min=1), help="Length of public generator words"),
        click.option("--params-seed", default=7, type=int, help="Seed for the public generators"),
        click.option("--positive", is_flag=True, help="Private words use positive generators only"),
    ]):
        func = option(func)
    return func


def resolve_platform(ctx: click.Context, name: str, config_path: Optional[str]) -> PlatformDescriptor:
    settings: Settings = ctx.obj["settings"]
    config = load_platform_config(config_path) if config_path else None
    return get_platform(name, settings.budget, config)


def resolve_session(ctx: click.Context, n, m, s, t, gen_len, positive) -> SessionSettings:
    base: SessionSettings = ctx.obj["settings"].session
    updates = {k: v for k, v in dict(n=n, m=m, s=s, t=t, generator_length=gen_len).items() if v is not None}
    if positive:
        updates["signed"] = False
    try:
        return SessionSettings.model_validate({**base.model_dump(), **updates})
    except ValidationError as exc:
        raise ConfigError(f"invalid session settings: {exc.errors()[0]['msg']}") from exc


def describe_element(platform: PlatformDescriptor, element) -> str:
    if isinstance(element, Portrait):
        return f"portrait: {element.node_count} nodes, depth {element.depth}"
    if isinstance(element, AffineElement):
        return str(element)
    return repr(element)


@click.group()
@click.version_option(version="1.0.0", prog_name="automaton-aag")
@click.option("-v", "--verbose", is_flag=True, help="Debug logging")
@click.option("--env-file", type=click.Path(dir_okay=False), default=None, help="Read settings from this .env file")
@click.pass_context
def cli(ctx, verbose, env_file):
    """Automaton groups as platforms for the Anshel-Anshel-Goldfeld key agreement."""
    try:
        settings = Settings.from_env(env_file)
    except ToolkitError as exc:
        err_console.print(f"[bold red]Error:[/] {exc}")
        sys.exit(exc.exit_code)
    setup_logging("DEBUG" if verbose else settings.log_level, err_console)
    ctx.ensure_object(dict)
    ctx.obj["settings"] = settings


@cli.command()
@click.argument("name", required=False)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), help="Platform config file")
@click.pass_context
@handle_errors
def platforms(ctx, name, config_path):
    """List registered platforms, or describe one."""
    if name:
        platform = resolve_platform(ctx, name, config_path)
        info = platform.describe()
        table = Table(show_header=False, box=None)
        table.add_column("Property", style="cyan")
        table.add_column("Value", style="green")
        for key, value in info.items():
            table.add_row(key, ", ".join(map(str, value)) if isinstance(value, list) else str(value))
        console.print(Panel(table, title=platform.name, border_style="cyan"))
        return

    table = Table(show_header=True, header_style="bold cyan")
    table.add_column("Id", style="dim")
    table.add_column("Name", style="green")
    table.add_column("Kind")
    table.add_column("Generators")
    table.add_column("Contracting")
    table.add_column("Nucleus")
    for platform in list_platforms(ctx.obj["settings"].budget):
        info = platform.describe()
        table.add_row(
            f"{info['id']:#04x}",
            info["name"],
            info["kind"],
            str(platform.generator_count),
            "yes" if info["contracting"] else "no",
            str(info["nucleus"]) if info["nucleus"] is not None else "-",
        )
    console.print(table)


@cli.command(name="eval")
@click.argument("platform_name", type=click.Choice(PLATFORM_CHOICES))
@click.argument("word")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), help="Platform config file")
@click.option("--apply", "string", default=None, help="Also act on this letter string")
@click.option("--depth", default=0, type=click.IntRange(min=0), help="Print the portrait to this depth")
@click.pass_context
@handle_errors
def evaluate(ctx, platform_name, word, config_path, string, depth):
    """Reduce a word, decide triviality and summarize its canonical form."""
    platform = resolve_platform(ctx, platform_name, config_path)
    parsed = platform.parse_word(word)
    with Timer("word problem") as timer:
        trivial = platform.word_is_trivial(parsed)
    console.print(f"reduced: {platform.format_word(parsed)}")
    console.print("trivial" if trivial else "nontrivial")

    if string is not None and isinstance(platform, AutomatonPlatform):
        console.print(f"image: {platform.group.apply(parsed, string)}")
    if depth and isinstance(platform, AutomatonPlatform):
        shallow = portrait(platform.group, parsed, depth)
        for node_depth, label in _portrait_lines(platform, shallow.root):
            console.print("  " * node_depth + label)
    if platform.contracting or not isinstance(platform, AutomatonPlatform):
        element = platform.canonical(parsed)
        data = platform.serialize_element(element)
        console.print(describe_element(platform, element))
        console.print(f"bytes: {hex_digest(data, 4)}")
    console.print(f"[dim]{timer}[/dim]")


def _portrait_lines(platform: AutomatonPlatform, root):
    stack = [(0, "", root)]
    while stack:
        depth, prefix, node = stack.pop()
        if isinstance(node, SectionLeaf):
            yield depth, f"{prefix}-> {platform.group.format(node.letters)}"
            continue
        yield depth, f"{prefix}perm {list(node.perm)}"
        for x in reversed(range(len(node.children))):
            stack.append((depth + 1, f"{x}: ", node.children[x]))


@cli.command()
@platform_options
@session_options
@click.option("--side", type=click.Choice(["alice", "bob"]), default="alice")
@click.option("--seed", default=1, type=int, help="Private key seed")
@click.pass_context
@handle_errors
def keygen(ctx, platform_name, config_path, n, m, s, t, gen_len, params_seed, positive, side, seed):
    """Draw public parameters and one private key; print the transmission digest."""
    platform = resolve_platform(ctx, platform_name, config_path)
    session = resolve_session(ctx, n, m, s, t, gen_len, positive)
    params = make_params(platform, session.n, session.m, session.generator_length, params_seed)
    who = Side.ALICE if side == "alice" else Side.BOB
    length = session.s if who is Side.ALICE else session.t
    priv = gen_private(params, who, length, seed, session.signed, session.max_private_length)
    tx = make_transmission(platform, params, priv)
    console.print(f"private word: {priv}")
    console.print(f"transmission: {len(tx.elements)} elements, {len(tx.encode(platform))} bytes")


@cli.command()
@platform_options
@session_options
@click.option("--local", is_flag=True, help="Run both sides in this process")
@click.option("--seed-a", default=1, type=int, help="Alice's seed")
@click.option("--seed-b", default=2, type=int, help="Bob's seed")
@click.option("--transcript", "transcript_path", type=click.Path(dir_okay=False), help="Write the session transcript")
@click.pass_context
@handle_errors
def exchange(ctx, platform_name, config_path, n, m, s, t, gen_len, params_seed, positive,
             local, seed_a, seed_b, transcript_path):
    """Run a key agreement; use host/join for two processes."""
    if not local:
        raise click.UsageError("exchange needs --local (use host/join for two processes)")
    platform = resolve_platform(ctx, platform_name, config_path)
    session = resolve_session(ctx, n, m, s, t, gen_len, positive)
    with Timer("exchange") as timer:
        params = make_params(platform, session.n, session.m, session.generator_length, params_seed)
        result = exchange_local(platform, params, seed_a, seed_b, session)
    console.print(f"alice: {result.alice_key.hex}")
    console.print(f"bob:   {result.bob_key.hex}")
    console.print(f"keys agree: {str(result.transcript.keys_agree).lower()}")
    if transcript_path:
        result.transcript.save(transcript_path)
        console.print(f"[green]transcript saved to:[/] {transcript_path}")
    console.print(f"[dim]{timer}[/dim]")
    if not result.transcript.keys_agree:
        sys.exit(ExchangeError.exit_code)


def _endpoint(role: Role, sock, platform, session, params_seed, seed, adopt):
    params = make_params(platform, session.n, session.m, session.generator_length, params_seed)
    side = role.side
    length = session.s if side is Side.ALICE else session.t

    def keygen_for(p):
        return gen_private(p, side, length, seed, session.signed, session.max_private_length)

    outcome = run_exchange(
        sock, role, platform, params, keygen_for, adopt_params=adopt,
        max_private_length=session.max_private_length,
    )
    console.print(f"{role.name.lower()}: {outcome.key.hex}")
    console.print("confirm: ok")


@cli.command()
@platform_options
@session_options
@click.option("--bind", default=None, help="Address to listen on")
@click.option("--port", default=None, type=click.IntRange(0, 65535))
@click.option("--seed", default=2, type=int, help="Private key seed")
@click.option("--adopt-params", is_flag=True, help="Accept the initiator's public parameters")
@click.pass_context
@handle_errors
def host(ctx, platform_name, config_path, n, m, s, t, gen_len, params_seed, positive, bind, port, seed, adopt_params):
    """Wait for one peer and run the exchange as responder."""
    wire = ctx.obj["settings"].wire
    platform = resolve_platform(ctx, platform_name, config_path)
    session = resolve_session(ctx, n, m, s, t, gen_len, positive)
    address = (bind or wire.host, wire.port if port is None else port)
    with socket.create_server(address) as server:
        console.print(f"[bold blue]listening on[/] {address[0]}:{server.getsockname()[1]}")
        conn, peer = server.accept()
        with conn:
            conn.settimeout(wire.timeout)
            console.print(f"[dim]peer {peer[0]}:{peer[1]}[/dim]")
            _endpoint(Role.RESPONDER, conn, platform, session, params_seed, seed,
                      adopt_params or wire.adopt_params)


@cli.command()
@platform_options
@session_options
@click.option("--host", "address", default=None, help="Responder address")
@click.option("--port", default=None, type=click.IntRange(0, 65535))
@click.option("--seed", default=1, type=int, help="Private key seed")
@click.pass_context
@handle_errors
def join(ctx, platform_name, config_path, n, m, s, t, gen_len, params_seed, positive, address, port, seed):
    """Connect to a host and run the exchange as initiator."""
    wire = ctx.obj["settings"].wire
    platform = resolve_platform(ctx, platform_name, config_path)
    session = resolve_session(ctx, n, m, s, t, gen_len, positive)
    target = (address or wire.host, wire.port if port is None else port)
    with socket.create_connection(target, timeout=wire.timeout) as sock:
        _endpoint(Role.INITIATOR, sock, platform, session, params_seed, seed, False)


@cli.command()
@platform_options
@session_options
@click.option("--from-seeds", is_flag=True, help="Build a tiny instance from seeds")
@click.option("--transcript", "transcript_path", type=click.Path(exists=True, dir_okay=False),
              help="Attack a saved transcript")
@click.option("--seed-a", default=1, type=int)
@click.option("--seed-b", default=2, type=int)
@click.option("--max-len", default=None, type=click.IntRange(min=0), help="Longest candidate word")
@click.option("--max-nodes", default=None, type=click.IntRange(min=1), help="Search node budget per side")
@click.option("--workers", default=None, type=click.IntRange(min=1), help="Search threads")
@click.option("--dedupe", is_flag=True, help="Skip candidates whose element was already seen")
@click.option("--json", "as_json", is_flag=True, help="Print the machine-readable record")
@click.pass_context
@handle_errors
def attack(ctx, platform_name, config_path, n, m, s, t, gen_len, params_seed, positive,
           from_seeds, transcript_path, seed_a, seed_b, max_len, max_nodes, workers, dedupe, as_json):
    """Recover the shared key by brute-force simultaneous conjugacy search."""
    if from_seeds == bool(transcript_path):
        raise click.UsageError("give exactly one of --from-seeds or --transcript")
    settings: Settings = ctx.obj["settings"]
    updates = {k: v for k, v in dict(max_length=max_len, max_nodes=max_nodes, workers=workers).items() if v is not None}
    if dedupe:
        updates["dedupe"] = True
    attack_settings: AttackSettings = settings.attack.model_copy(update=updates)
    platform = resolve_platform(ctx, platform_name, config_path)

    if from_seeds:
        session = resolve_session(ctx, n or 2, m or 2, s or 2, t or 2, gen_len, positive)
        params = make_params(platform, session.n, session.m, session.generator_length, params_seed)
        honest = exchange_local(platform, params, seed_a, seed_b, session)
        transcript = honest.transcript
        s_len, t_len = session.s, session.t
    else:
        transcript = Transcript.load(transcript_path)
        s_len = t_len = 0
    params, alice_tx, bob_tx = transcript.decode(platform)

    with Timer("attack") as timer:
        result_a, result_b, digest = attack_transcript(
            platform, params, alice_tx, bob_tx, attack_settings.max_length, attack_settings
        )
    found = result_a.status is AttackStatus.FOUND and result_b.status is AttackStatus.FOUND
    recovered = digest == transcript.alice_digest if digest is not None else False
    report = AttackReport(
        platform=platform.name,
        n=params.n,
        m=params.m,
        s=s_len,
        t=t_len,
        L=attack_settings.max_length,
        found=found,
        nodes=result_a.nodes + result_b.nodes,
        milliseconds=timer.milliseconds,
        key_recovered=recovered,
    )
    if as_json:
        click.echo(json.dumps(report.to_dict()))
    else:
        console.print(report.summary())
        for label, result in (("alice", result_a), ("bob", result_b)):
            console.print(
                f"  {label}: {result.status.value}, {result.nodes} nodes, solution {_index_text(result.solution, label)}"
            )
        console.print(f"key recovered: {str(recovered).lower()}")
    if not found:
        sys.exit(EXIT_NOT_FOUND)


def _index_text(word, label: str) -> str:
    if word is None:
        return "-"
    return format_index_word(word, "a" if label == "alice" else "b")


@cli.command()
@platform_options
@click.option("--lengths", default="50,100,200,400", help="Comma-separated word lengths")
@click.option("--samples", default=5, type=click.IntRange(min=1), help="Words per length")
@click.option("--seed", default=1, type=int)
@click.option("--sessions", default=3, type=click.IntRange(min=0), help="Timed key agreements")
@click.pass_context
@handle_errors
def bench(ctx, platform_name, config_path, lengths, samples, seed, sessions):
    """Time the word problem on random words and commutators, then a few key agreements."""
    platform = resolve_platform(ctx, platform_name, config_path)
    try:
        sizes = [int(x) for x in lengths.split(",") if x.strip()]
    except ValueError as exc:
        raise click.BadParameter(f"not a list of integers: {lengths!r}") from exc
    if len(sizes) < 2 or any(size < 2 for size in sizes):
        raise click.BadParameter("need at least two lengths of 2 or more")
    rng = SplitMix64(seed)

    table = Table(show_header=True, header_style="bold cyan")
    table.add_column("Length", justify="right")
    table.add_column("Words ms", justify="right")
    table.add_column("Commutators ms", justify="right")
    table.add_column("Trivial commutators", justify="right")
    means = []
    for size in sizes:
        word_mean, _ = _time_trivial(platform, [platform.random_word(rng, size) for _ in range(samples)])
        commutator_mean, trivial = _time_trivial(
            platform, [_random_commutator(platform, rng, size) for _ in range(samples)]
        )
        means.append(word_mean)
        table.add_row(str(size), f"{1000 * word_mean:.3f}", f"{1000 * commutator_mean:.3f}", f"{trivial}/{samples}")
    console.print(table)
    console.print(f"log-log slope (random words): {loglog_slope(sizes, means):.2f}")

    if sessions and (platform.contracting or not isinstance(platform, AutomatonPlatform)):
        defaults = ctx.obj["settings"].session
        with Timer("sessions") as timer:
            for i in range(sessions):
                params = make_params(platform, defaults.n, defaults.m, defaults.generator_length, seed + i)
                exchange_local(platform, params, 2 * i + 1, 2 * i + 2, defaults)
        console.print(f"key agreement: {timer.milliseconds / sessions:.1f} ms per session")


def _time_trivial(platform: PlatformDescriptor, words) -> Tuple[float, int]:
    """Mean is_trivial seconds over the words, and how many were trivial."""
    total = 0.0
    trivial = 0
    for word in words:
        with Timer() as timer:
            trivial += platform.word_is_trivial(word)
        total += timer.elapsed
    return total / len(words), trivial


def _random_commutator(platform: PlatformDescriptor, rng: SplitMix64, size: int):
    """[u, v] with |u| + |v| close to size / 2 each way."""
    half = max(size // 4, 1)
    u = platform.random_word(rng, half)
    v = platform.random_word(rng, half)
    if isinstance(platform, AutomatonPlatform):
        group = platform.group
        letters = u.letters + v.letters + group.invert(u).letters + group.invert(v).letters
        return GeneratorWord(platform.platform_id, group.reduce_letters(letters))
    return reduce_index_word(u + v + invert_index_word(u) + invert_index_word(v))


def main():
    """Main entry point."""
    cli()


if __name__ == "__main__":
    main()
