"""From one class's descriptors to its final prompt texts.

Walks the snowboarding example end to end: the five descriptor kinds, the
combination's fixed ordering, class prepending, and template expansion,
with the batch-size arithmetic made explicit.
"""

from zsar.assembly import DescriptorConfig, DescriptorKind, assemble, base_texts, default_templates
from zsar.descriptors import DescriptorSet
from zsar.labels import ActionClass

ds = DescriptorSet(
    action=ActionClass.from_raw("snowboarding"),
    decomposition=[
        "Strap your feet securely onto the snowboard bindings",
        "Lean forward to initiate movement down the slope",
        "Use heel-to-toe shifts in weight to steer and balance as you descend",
    ],
    description=(
        "A person sliding down a snow-covered slope on a single board attached "
        "to their feet, making turns and jumps while maintaining balance."
    ),
    context="snow-covered mountain slope or snow park",
    objects=["snowboard", "snow boots", "helmet"],
    llm_model_id="demo",
)

print("== base texts per descriptor kind ==")
for kind in DescriptorKind:
    texts = base_texts(ds, [kind])
    print(f"{kind.value:13s} ({len(texts)} texts)  e.g. {texts[0][:60]!r}")

print("\n== the combination keeps a fixed order: class, steps, description, context, objects ==")
for i, text in enumerate(base_texts(ds, [DescriptorKind.COMBINATION])):
    print(f"  {i}: {text[:76]}")

print("\n== prepending the class phrase (never onto itself) ==")
cfg = DescriptorConfig(
    kinds=(DescriptorKind.COMBINATION,), prepend_class=True, use_templates=False
)
batch = assemble(ds, cfg)
print("  class text stays:", batch.texts[0])
print("  description gets prefixed:", batch.texts[4][:64], "...")

print("\n== template expansion multiplies the batch ==")
templates = default_templates()
cfg = DescriptorConfig(
    kinds=(DescriptorKind.COMBINATION,), prepend_class=True,
    use_templates=True, templates=tuple(templates),
)
batch = assemble(ds, cfg)
print(f"  9 base texts x {len(templates)} templates = {len(batch)} prompts")
print("  first:", batch.texts[0])
print("  last: ", batch.texts[-1])
