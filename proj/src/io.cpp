namespace lncone {}
