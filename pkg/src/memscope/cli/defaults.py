"""Built-in region configuration used when ``--regions`` is not given.

Pool IDs line up with the module IDs of the default simulator model:
pool 1 is ordinary DRAM, pool 2 the slower programmable-logic DRAM.
"""

DEFAULT_REGIONS = """\
dram@10000000 {
    device_type = "memory";
    compatible = "mempool";
    reg = <0x0 0x10000000 0x0 0x10000000>;
};

pldram@400000000 {
    device_type = "memory";
    compatible = "mempool";
    reg = <0x4 0x0 0x0 0x10000000>;
};
"""
